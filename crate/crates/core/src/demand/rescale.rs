use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DemandError, HourlyBusLoad, LoadPatternLibrary, ZoneAssignment};
use crate::interp::endpoint_line;

#[derive(Debug, Clone, PartialEq)]
pub struct MinutelyBusLoad {
    pub bus_id: u32,
    /// Hour index of the first value.
    pub start_hour: usize,
    /// One value per minute; consecutive hours share their boundary minute.
    pub minute_mw: Vec<f64>,
}

/// Modulates the straight line from `start_mw` to `end_mw` by `pattern`.
pub fn rescale_hour(start_mw: f64, end_mw: f64, pattern: &[f64]) -> Result<Vec<f64>, DemandError> {
    let m = pattern.len();
    if m < 2 {
        return Err(DemandError::InvalidInput(format!("pattern needs at least 2 minutes, got {m}")));
    }
    if !(start_mw >= 0.0 && end_mw >= 0.0) || !start_mw.is_finite() || !end_mw.is_finite() {
        return Err(DemandError::InvalidInput(format!("hourly endpoints must be >= 0, got {start_mw}, {end_mw}")));
    }
    Ok((0..m).map(|i| endpoint_line(start_mw, end_mw, m, i) * pattern[i]).collect())
}

/// Minutely series for hours `start_hour .. start_hour + hours`, reusing one
/// pattern for every hour.
pub fn rescale_window(
    hourly: &HourlyBusLoad,
    pattern: &[f64],
    start_hour: usize,
    hours: usize,
) -> Result<MinutelyBusLoad, DemandError> {
    if hours == 0 {
        return Err(DemandError::InvalidInput("window must span at least one hour".into()));
    }
    let len = hourly.hourly_mw.len();
    let mut minute_mw = Vec::with_capacity(hours * (pattern.len().saturating_sub(1)) + 1);
    for h in start_hour..start_hour + hours {
        if h + 1 >= len {
            return Err(DemandError::MissingHour { hour: h, next: h + 1, len });
        }
        let seg = rescale_hour(hourly.hourly_mw[h], hourly.hourly_mw[h + 1], pattern)?;
        let skip = usize::from(!minute_mw.is_empty());
        minute_mw.extend_from_slice(&seg[skip..]);
    }
    Ok(MinutelyBusLoad { bus_id: hourly.bus_id, start_hour, minute_mw })
}

/// Looks up the bus's zone pattern and rescales the window.
pub fn rescale_bus_window(
    hourly: &HourlyBusLoad,
    zone_id: u32,
    assignment: &ZoneAssignment,
    lib: &LoadPatternLibrary,
    start_hour: usize,
    hours: usize,
) -> Result<MinutelyBusLoad, DemandError> {
    let k = assignment
        .pattern_for_zone(zone_id)
        .ok_or_else(|| DemandError::InvalidInput(format!("zone {zone_id} has no assigned pattern")))?;
    let pattern = lib
        .patterns
        .get(k)
        .ok_or_else(|| DemandError::InvalidInput(format!("pattern {k} missing from library")))?;
    rescale_window(hourly, pattern, start_hour, hours)
}

/// Multiplies each value by `1 + e`, `e ~ N(0, sigma)`; values stay >= 0.
pub fn apply_forecast_noise<R: Rng>(series: &mut [f64], sigma: f64, rng: &mut R) -> Result<(), DemandError> {
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| DemandError::InvalidInput(format!("noise sigma: {e}")))?;
    for v in series.iter_mut() {
        *v = (*v * (1.0 + normal.sample(rng))).max(0.0);
    }
    Ok(())
}
