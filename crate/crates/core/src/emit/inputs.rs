use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};

use super::{EmitError, Timeline};
use crate::demand::MinuteLoadTable;
use crate::grid::GridCase;
use crate::rng::substream;
use crate::time::format_timestamp;
use crate::wind::WindTable;

/// Per-step injections, indexed `[step][bus]` in case bus order and
/// `[step][farm]` in case farm order.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionTable {
    pub bus_ids: Vec<u32>,
    pub farm_ids: Vec<u32>,
    /// Loads interpolated to the step grid, before noise.
    pub forecast_load_mw: Vec<Vec<f64>>,
    pub load_p_mw: Vec<Vec<f64>>,
    pub load_q_mvar: Vec<Vec<f64>>,
    pub wind_mw: Vec<Vec<f64>>,
}

fn interpolate(column: &[f64], minute_pos: f64) -> Option<f64> {
    let n = column.len();
    if n == 0 || minute_pos < 0.0 || minute_pos > (n - 1) as f64 {
        return None;
    }
    if n == 1 {
        return Some(column[0]);
    }
    let i = (minute_pos.floor() as usize).min(n - 2);
    let f = minute_pos - i as f64;
    Some((1.0 - f) * column[i] + f * column[i + 1])
}

/// Interpolates loads onto the timeline, applies multiplicative measurement
/// noise `1 + e`, `e ~ N(0, noise_sigma)` per bus and step, derives reactive
/// load from the power factor and samples wind at the step instants.
pub fn build_timeline_inputs(
    case: &GridCase,
    loads: &MinuteLoadTable,
    wind: Option<&WindTable>,
    timeline: &Timeline,
    noise_sigma: f64,
    default_power_factor: f64,
    seed: u64,
) -> Result<InjectionTable, EmitError> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(EmitError::InvalidInput(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let normal = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("checked sigma"));
    let load_col: BTreeMap<u32, &Vec<f64>> = loads.bus_ids.iter().copied().zip(&loads.columns).collect();

    let mut pf = Vec::with_capacity(case.buses.len());
    let mut cols = Vec::with_capacity(case.buses.len());
    for bus in &case.buses {
        let p = bus.power_factor.unwrap_or(default_power_factor);
        if !(p > 0.0 && p <= 1.0) {
            return Err(EmitError::InvalidInput(format!("bus {}: power factor {p} outside (0, 1]", bus.id)));
        }
        pf.push(p.acos().tan());
        let col = load_col.get(&bus.id).ok_or_else(|| EmitError::Coverage {
            series: format!("load of bus {}", bus.id),
            instant: "any instant".into(),
        })?;
        cols.push(*col);
    }

    let wind_cols: Vec<&Vec<f64>> = if case.wind_farms.is_empty() {
        Vec::new()
    } else {
        let w = wind.ok_or_else(|| EmitError::Coverage { series: "wind power".into(), instant: "any instant".into() })?;
        case.wind_farms
            .iter()
            .map(|f| {
                w.farm_ids.iter().position(|id| *id == f.id).map(|i| &w.columns[i]).ok_or_else(|| EmitError::Coverage {
                    series: format!("power of wind farm {}", f.id),
                    instant: "any instant".into(),
                })
            })
            .collect::<Result<_, _>>()?
    };
    let wind_index: BTreeMap<i64, usize> =
        wind.map(|w| w.timestamps.iter().enumerate().map(|(i, t)| (t.timestamp_micros(), i)).collect()).unwrap_or_default();

    let n = timeline.frame_count();
    let mut table = InjectionTable {
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        farm_ids: case.wind_farms.iter().map(|f| f.id).collect(),
        forecast_load_mw: Vec::with_capacity(n),
        load_p_mw: Vec::with_capacity(n),
        load_q_mvar: Vec::with_capacity(n),
        wind_mw: Vec::with_capacity(n),
    };
    for step in 0..n {
        let t = timeline.instant(step);
        let minute_pos = (t - loads.start).num_microseconds().unwrap_or(i64::MAX) as f64 / 60e6;
        let mut forecast = Vec::with_capacity(cols.len());
        let mut p = Vec::with_capacity(cols.len());
        let mut q = Vec::with_capacity(cols.len());
        for ((bus, col), tan_phi) in case.buses.iter().zip(&cols).zip(&pf) {
            let base = interpolate(col, minute_pos).ok_or_else(|| EmitError::Coverage {
                series: format!("load of bus {}", bus.id),
                instant: format_timestamp(&t),
            })?;
            let factor = match &normal {
                Some(d) => 1.0 + d.sample(&mut substream(seed, "load-noise", step as u64, bus.id.into())),
                None => 1.0,
            };
            let value = base * factor;
            forecast.push(base);
            p.push(value);
            q.push(value * tan_phi);
        }
        let mut w = Vec::with_capacity(wind_cols.len());
        if !wind_cols.is_empty() {
            let idx = wind_index.get(&t.timestamp_micros()).copied().ok_or_else(|| EmitError::Coverage {
                series: "wind power".into(),
                instant: format_timestamp(&t),
            })?;
            w.extend(wind_cols.iter().map(|c| c[idx]));
        }
        table.forecast_load_mw.push(forecast);
        table.load_p_mw.push(p);
        table.load_q_mvar.push(q);
        table.wind_mw.push(w);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_on_the_grid() {
        let col = [10.0, 20.0, 40.0];
        assert_eq!(interpolate(&col, 0.0), Some(10.0));
        assert_eq!(interpolate(&col, 0.25), Some(12.5));
        assert_eq!(interpolate(&col, 2.0), Some(40.0));
        assert_eq!(interpolate(&col, 2.01), None);
        assert_eq!(interpolate(&col, -0.1), None);
    }
}
