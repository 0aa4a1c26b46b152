use super::WindError;
use crate::grid::{CorrelationCurve, GeoPoint, WindFarm, EARTH_RADIUS_KM};

pub const DEFAULT_LATTICE_SPACING_KM: f64 = 600.0;

/// Reference points and the weight each farm gives them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLattice {
    pub spacing_km: f64,
    pub points: Vec<GeoPoint>,
    pub farm_ids: Vec<u32>,
    /// `weights[e][n]`: correlation between farm `e` and point `n`.
    pub weights: Vec<Vec<f64>>,
    /// Row sums of `weights`.
    pub omega: Vec<f64>,
}

fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 && lon > 0.0 {
        180.0
    } else {
        w
    }
}

/// Points covering the box with one spacing of margin on every side.
/// Rows are `spacing_km` apart along meridians; within a row, neighbors are
/// `spacing_km` apart along the great circle. `(min_lat, min_lon)` is
/// always a point.
pub fn lattice_points(min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64, spacing_km: f64) -> Vec<GeoPoint> {
    let theta = spacing_km / EARTH_RADIUS_KM;
    let dlat = theta.to_degrees();
    let row_count = ((max_lat - min_lat) / dlat).ceil().max(0.0) as usize + 3;
    let mut points = Vec::new();
    for r in 0..row_count {
        let lat = min_lat + (r as f64 - 1.0) * dlat;
        if !(-90.0..=90.0).contains(&lat) {
            continue;
        }
        let arg = (theta / 2.0).sin() / lat.to_radians().cos();
        if !(arg < 1.0) {
            points.push(GeoPoint { lat, lon: wrap_lon(min_lon) });
            continue;
        }
        let dlon = (2.0 * arg.asin()).to_degrees();
        let max_cols = (360.0 / dlon).floor() as usize;
        let col_count = (((max_lon - min_lon) / dlon).ceil().max(0.0) as usize + 3).min(max_cols.max(1));
        for c in 0..col_count {
            points.push(GeoPoint { lat, lon: wrap_lon(min_lon + (c as f64 - 1.0) * dlon) });
        }
    }
    points
}

/// Lattice over the bounding box of `farms`, with weights from `curve`.
pub fn build_reference_lattice(
    farms: &[WindFarm],
    curve: &CorrelationCurve,
    spacing_km: f64,
) -> Result<ReferenceLattice, WindError> {
    if farms.is_empty() {
        return Err(WindError::InvalidInput("reference lattice needs at least one wind farm".into()));
    }
    if !(spacing_km.is_finite() && spacing_km > 0.0) {
        return Err(WindError::InvalidInput(format!("lattice spacing must be positive, got {spacing_km}")));
    }
    let locs: Vec<GeoPoint> = farms.iter().map(WindFarm::location).collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&GeoPoint) -> f64| locs.iter().map(get).fold(init, f);
    let min_lat = fold(f64::min, f64::INFINITY, |p| p.lat);
    let max_lat = fold(f64::max, f64::NEG_INFINITY, |p| p.lat);
    let min_lon = fold(f64::min, f64::INFINITY, |p| p.lon);
    let max_lon = fold(f64::max, f64::NEG_INFINITY, |p| p.lon);
    let points = lattice_points(min_lat, max_lat, min_lon, max_lon, spacing_km);

    let mut weights = Vec::with_capacity(farms.len());
    let mut omega = Vec::with_capacity(farms.len());
    for (farm, loc) in farms.iter().zip(&locs) {
        let dists: Vec<f64> = points.iter().map(|p| loc.distance_km(p)).collect();
        let row: Vec<f64> = dists.iter().map(|&d| curve.eval_unchecked(d)).collect();
        let sum: f64 = row.iter().sum();
        if !(sum > 0.0) {
            let nearest_km = dists.iter().copied().fold(f64::INFINITY, f64::min);
            return Err(WindError::Coverage { farm: farm.id, nearest_km });
        }
        weights.push(row);
        omega.push(sum);
    }
    Ok(ReferenceLattice { spacing_km, points, farm_ids: farms.iter().map(|f| f.id).collect(), weights, omega })
}
