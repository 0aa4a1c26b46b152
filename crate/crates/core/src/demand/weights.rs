//! Bottom-up hourly bus load from sector prototype profiles.
//!
//! For a bus with peak `P` and class shares `r`, the weights `w >= 0` on the
//! nearest residential, commercial and industrial prototypes are fitted so
//! that the weighted sum peaks at `P` and the energy delivered by each class
//! matches `r`. Both conditions are written as rows of a small nonnegative
//! least-squares problem in the dimensionless variables
//! `y_c = w_c * E_c / (P * H)` (class energy over peak times horizon):
//!
//! ```text
//! peak row:   sum_c y_c * (H * p_c[h*] / E_c) = 1
//! share rows: y_i - r_i * sum_c y_c          = 0     for each class i
//! ```
//!
//! `h*` is the hour at which the weighted sum peaks; it is re-evaluated after
//! each solve until stable.

use nalgebra::{DMatrix, DVector};

use super::DemandError;
use crate::grid::{Bus, GeoPoint, RciRatio, Sector};

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeProfile {
    pub sector: Sector,
    pub location: GeoPoint,
    pub hourly_mw: Vec<f64>,
}

impl PrototypeProfile {
    pub fn energy(&self) -> f64 {
        self.hourly_mw.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitTolerance {
    /// Relative error allowed on the fitted peak.
    pub peak_rel: f64,
    /// Absolute error allowed on each class energy share.
    pub share_abs: f64,
}

impl Default for FitTolerance {
    fn default() -> Self {
        FitTolerance { peak_rel: 1e-6, share_abs: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit {
    /// Residential, commercial, industrial.
    pub weights: [f64; 3],
    pub peak_mw: f64,
    pub peak_residual_rel: f64,
    pub shares: [f64; 3],
    pub share_residuals: [f64; 3],
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourlyBusLoad {
    pub bus_id: u32,
    pub hourly_mw: Vec<f64>,
    pub sector_split: Vec<[f64; 3]>,
}

/// Nearest prototype of each sector, in residential/commercial/industrial
/// order. Ties go to the earlier profile.
pub fn nearest_prototypes<'a>(
    location: GeoPoint,
    library: &'a [PrototypeProfile],
) -> Result<[&'a PrototypeProfile; 3], DemandError> {
    let pick = |sector: Sector| {
        library
            .iter()
            .filter(|p| p.sector == sector)
            .map(|p| (location.distance_km(&p.location), p))
            .fold(None, |best: Option<(f64, &PrototypeProfile)>, cur| match best {
                Some(b) if b.0 <= cur.0 => Some(b),
                _ => Some(cur),
            })
            .map(|(_, p)| p)
            .ok_or_else(|| DemandError::InvalidInput(format!("no {} prototype profile", sector.name())))
    };
    Ok([pick(Sector::Residential)?, pick(Sector::Commercial)?, pick(Sector::Industrial)?])
}

fn weighted_sum(weights: &[f64; 3], candidates: &[&PrototypeProfile; 3], h: usize) -> f64 {
    (0..3).map(|c| weights[c] * candidates[c].hourly_mw[h]).sum()
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Exact NNLS for at most three unknowns: try every support, keep the
/// feasible least-squares solution with the smallest residual.
fn nnls_small(a: &DMatrix<f64>, b: &DVector<f64>, allowed: &[bool]) -> Vec<f64> {
    let n = a.ncols();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        if support.iter().any(|&j| !allowed[j]) {
            continue;
        }
        let mut x = vec![0.0; n];
        if !support.is_empty() {
            let sub = DMatrix::from_fn(a.nrows(), support.len(), |i, j| a[(i, support[j])]);
            let Ok(sol) = sub.svd(true, true).solve(b, 1e-12) else { continue };
            if sol.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
                continue;
            }
            for (k, &j) in support.iter().enumerate() {
                x[j] = sol[k].max(0.0);
            }
        }
        let r = (a * DVector::from_vec(x.clone()) - b).norm_squared();
        if best.as_ref().is_none_or(|(br, _)| r < *br - 1e-15) {
            best = Some((r, x));
        }
    }
    best.map(|(_, x)| x).unwrap_or_else(|| vec![0.0; n])
}

/// Fits nonnegative class weights for `bus` on its three nearest candidate
/// profiles (residential, commercial, industrial order).
pub fn fit_bus_weights(
    bus: &Bus,
    candidates: [&PrototypeProfile; 3],
    tol: &FitTolerance,
) -> Result<WeightFit, DemandError> {
    fit_weights(bus.peak_load_mw, &bus.rci_ratio, candidates, tol)
}

pub(crate) fn fit_weights(
    peak: f64,
    ratio: &RciRatio,
    candidates: [&PrototypeProfile; 3],
    tol: &FitTolerance,
) -> Result<WeightFit, DemandError> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(DemandError::InvalidInput(format!("bus peak must be positive, got {peak}")));
    }
    for (c, p) in candidates.iter().enumerate() {
        if p.sector != Sector::ALL[c] {
            return Err(DemandError::InvalidInput(format!(
                "candidate {c} is {}, expected {}",
                p.sector.name(),
                Sector::ALL[c].name()
            )));
        }
        if p.hourly_mw.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DemandError::InvalidInput(format!("{} profile has negative or NaN values", p.sector.name())));
        }
    }
    let horizon = candidates[0].hourly_mw.len();
    if horizon == 0 || candidates.iter().any(|p| p.hourly_mw.len() != horizon) {
        return Err(DemandError::InvalidInput("candidate profiles must share a nonzero horizon".into()));
    }
    let energy: [f64; 3] = std::array::from_fn(|c| candidates[c].energy());
    let active: Vec<bool> = energy.iter().map(|&e| e > 0.0).collect();
    if !active.iter().any(|&a| a) {
        return Err(DemandError::InvalidInput("all candidate profiles are zero".into()));
    }
    let h = horizon as f64;

    // start from the peak hour of the share-matching direction
    let mut direction: [f64; 3] = std::array::from_fn(|c| if active[c] { ratio.0[c] / energy[c] } else { 0.0 });
    if direction.iter().all(|&d| d == 0.0) {
        direction = std::array::from_fn(|c| if active[c] { 1.0 / energy[c] } else { 0.0 });
    }
    let mut peak_hour = argmax((0..horizon).map(|t| weighted_sum(&direction, &candidates, t)));
    let mut weights = [0.0; 3];

    for _ in 0..16 {
        let a = DMatrix::from_fn(4, 3, |i, c| {
            if !active[c] {
                return 0.0;
            }
            match i {
                0 => h * candidates[c].hourly_mw[peak_hour] / energy[c],
                _ => f64::from(u8::from(i - 1 == c)) - ratio.0[i - 1],
            }
        });
        let b = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let y = nnls_small(&a, &b, &active);
        weights = std::array::from_fn(|c| if active[c] { y[c] * peak * h / energy[c] } else { 0.0 });
        let next = argmax((0..horizon).map(|t| weighted_sum(&weights, &candidates, t)));
        if next == peak_hour {
            break;
        }
        peak_hour = next;
    }

    let peak_mw = (0..horizon).map(|t| weighted_sum(&weights, &candidates, t)).fold(0.0, f64::max);
    let class_energy: [f64; 3] = std::array::from_fn(|c| weights[c] * energy[c]);
    let total: f64 = class_energy.iter().sum();
    let shares: [f64; 3] = std::array::from_fn(|c| if total > 0.0 { class_energy[c] / total } else { 0.0 });
    let share_residuals: [f64; 3] = std::array::from_fn(|c| shares[c] - ratio.0[c]);
    let peak_residual_rel = (peak_mw - peak) / peak;
    let within_tolerance =
        peak_residual_rel.abs() <= tol.peak_rel && share_residuals.iter().all(|r| r.abs() <= tol.share_abs);
    Ok(WeightFit { weights, peak_mw, peak_residual_rel, shares, share_residuals, within_tolerance })
}

/// Weighted sum of the candidate profiles, with the per-class split retained.
pub fn hourly_bus_load(bus_id: u32, weights: &[f64; 3], candidates: [&PrototypeProfile; 3]) -> HourlyBusLoad {
    let horizon = candidates[0].hourly_mw.len();
    let sector_split: Vec<[f64; 3]> = (0..horizon)
        .map(|t| std::array::from_fn(|c| weights[c] * candidates[c].hourly_mw[t]))
        .collect();
    let hourly_mw = sector_split.iter().map(|s| s.iter().sum()).collect();
    HourlyBusLoad { bus_id, hourly_mw, sector_split }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn profile(sector: Sector, lat: f64, values: Vec<f64>) -> PrototypeProfile {
        PrototypeProfile { sector, location: GeoPoint { lat, lon: -97.0 }, hourly_mw: values }
    }

    fn fixture_profiles() -> [PrototypeProfile; 3] {
        let res = (0..48).map(|t| 1.0 + 0.6 * (2.0 * PI * (t as f64 - 13.0) / 24.0).sin().max(-0.9)).collect();
        let com = (0..48).map(|t| if (8..18).contains(&(t % 24)) { 3.0 } else { 1.2 }).collect();
        let ind = (0..48).map(|t| 5.0 + 0.1 * ((t * 7) % 5) as f64).collect();
        [
            profile(Sector::Residential, 30.0, res),
            profile(Sector::Commercial, 30.1, com),
            profile(Sector::Industrial, 30.2, ind),
        ]
    }

    fn bus(peak: f64, rci: RciRatio) -> Bus {
        Bus {
            id: 1,
            location: GeoPoint { lat: 30.0, lon: -97.0 },
            zone_id: 1,
            peak_load_mw: peak,
            rci_ratio: rci,
            power_factor: None,
        }
    }

    #[test]
    fn identical_flat_profiles() {
        let flat = |s| profile(s, 30.0, vec![1.0; 24]);
        let c = [flat(Sector::Residential), flat(Sector::Commercial), flat(Sector::Industrial)];
        let fit = fit_bus_weights(&bus(10.0, RciRatio::new(0.5, 0.3, 0.2)), [&c[0], &c[1], &c[2]], &FitTolerance::default())
            .unwrap();
        for (w, e) in fit.weights.iter().zip([5.0, 3.0, 2.0]) {
            assert!((w - e).abs() < 1e-9, "{:?}", fit.weights);
        }
        assert!(fit.within_tolerance);
    }

    #[test]
    fn pure_residential_ratio() {
        let p = fixture_profiles();
        let fit = fit_bus_weights(&bus(40.0, RciRatio::new(1.0, 0.0, 0.0)), [&p[0], &p[1], &p[2]], &FitTolerance::default())
            .unwrap();
        assert_eq!(fit.weights[1], 0.0);
        assert_eq!(fit.weights[2], 0.0);
        let res_peak = p[0].hourly_mw.iter().cloned().fold(0.0, f64::max);
        assert!((fit.weights[0] * res_peak - 40.0).abs() < 1e-9);
    }

    /// Dense search over the weight simplex: for each direction the scale is
    /// set so the peak matches, and the direction with the smallest squared
    /// share error wins.
    fn grid_search_oracle(peak: f64, ratio: [f64; 3], p: &[PrototypeProfile; 3], steps: usize) -> [f64; 3] {
        let energy: Vec<f64> = p.iter().map(|x| x.hourly_mw.iter().sum()).collect();
        let mut best = (f64::INFINITY, [0.0; 3]);
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let a = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
                let series_peak = (0..p[0].hourly_mw.len())
                    .map(|t| (0..3).map(|c| a[c] * p[c].hourly_mw[t]).sum::<f64>())
                    .fold(0.0, f64::max);
                if series_peak <= 0.0 {
                    continue;
                }
                let w: Vec<f64> = a.iter().map(|x| x * peak / series_peak).collect();
                let tot: f64 = (0..3).map(|c| w[c] * energy[c]).sum();
                let err: f64 = (0..3).map(|c| (w[c] * energy[c] / tot - ratio[c]).powi(2)).sum();
                if err < best.0 {
                    best = (err, [w[0], w[1], w[2]]);
                }
            }
        }
        best.1
    }

    // produced by grid_search_oracle(25.0, [0.5, 0.3, 0.2], fixture, 1000)
    const GOLDEN_WEIGHTS: [f64; 3] = [8.72018800677703, 2.6970900492528127, 0.6772961558661772];

    #[test]
    fn fixture_matches_grid_search_oracle() {
        let p = fixture_profiles();
        let fit = fit_bus_weights(&bus(25.0, RciRatio::new(0.5, 0.3, 0.2)), [&p[0], &p[1], &p[2]], &FitTolerance::default())
            .unwrap();
        assert!(fit.within_tolerance, "{fit:?}");
        let oracle = grid_search_oracle(25.0, [0.5, 0.3, 0.2], &p, 1000);
        for c in 0..3 {
            assert!((oracle[c] - GOLDEN_WEIGHTS[c]).abs() < 1e-9, "oracle drifted: {oracle:?}");
            // one grid step in direction space moves a weight by roughly 0.1% of its scale
            assert!((fit.weights[c] - GOLDEN_WEIGHTS[c]).abs() < 0.02 * GOLDEN_WEIGHTS[c].max(1.0), "{fit:?}");
        }
    }

    #[test]
    fn energy_shares_match_ratio() {
        let p = fixture_profiles();
        for ratio in [[0.2, 0.2, 0.6], [0.7, 0.3, 0.0], [0.0, 0.0, 1.0], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]] {
            let rci = RciRatio(ratio);
            let fit = fit_bus_weights(&bus(100.0, rci), [&p[0], &p[1], &p[2]], &FitTolerance::default()).unwrap();
            assert!(fit.weights.iter().all(|&w| w >= 0.0));
            assert!(fit.within_tolerance, "{ratio:?} {fit:?}");
        }
    }

    #[test]
    fn zero_profile_is_reported_not_hidden() {
        let p = fixture_profiles();
        let dead = profile(Sector::Commercial, 30.0, vec![0.0; 48]);
        let fit = fit_bus_weights(&bus(10.0, RciRatio::new(0.5, 0.5, 0.0)), [&p[0], &dead, &p[2]], &FitTolerance::default())
            .unwrap();
        assert!(!fit.within_tolerance);
        assert_eq!(fit.weights[1], 0.0);
        assert!((fit.share_residuals[1] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn hourly_split_sums() {
        let p = fixture_profiles();
        let load = hourly_bus_load(3, &[1.0, 2.0, 0.5], [&p[0], &p[1], &p[2]]);
        for (t, split) in load.sector_split.iter().enumerate() {
            assert!((split.iter().sum::<f64>() - load.hourly_mw[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_picks_closest_per_sector() {
        let mut lib = fixture_profiles().to_vec();
        lib.push(profile(Sector::Residential, 45.0, vec![1.0; 48]));
        let near = nearest_prototypes(GeoPoint { lat: 44.0, lon: -97.0 }, &lib).unwrap();
        assert_eq!(near[0].location.lat, 45.0);
        assert!(nearest_prototypes(GeoPoint { lat: 0.0, lon: 0.0 }, &lib[..1]).is_err());
    }
}
