//! Composite-load component fractions per bus.
//!
//! Each bus mixes the residential, commercial and industrial rows of a
//! period's composition table in proportion to its class shares. Rows are
//! kept in percent; the mixed row is divided by its own total so that a
//! single-class bus reproduces its table row exactly.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Bus, RciRatio, Sector};

pub const COMPONENT_NAMES: [&str; 6] = ["motor_a", "motor_b", "motor_c", "motor_d", "electronic", "static_zip"];

#[derive(Debug, Error)]
pub enum CompositionError {
    #[error("composition table has no row for {period}/{class}")]
    MissingRow { period: Period, class: &'static str },
    #[error("invalid composition table: {0}")]
    InvalidTable(String),
    #[error("invalid period windows: {0}")]
    InvalidWindows(String),
    #[error("hour of day must lie in [0, 24), got {0}")]
    InvalidHour(u32),
    #[error("bus {bus}: {message}")]
    InvalidBus { bus: u32, message: String },
    #[error("failed to write composition: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Peak,
    Shoulder,
    Light,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::Peak, Period::Shoulder, Period::Light];

    pub fn name(self) -> &'static str {
        match self {
            Period::Peak => "peak",
            Period::Shoulder => "shoulder",
            Period::Light => "light",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "peak" => Ok(Period::Peak),
            "shoulder" => Ok(Period::Shoulder),
            "light" => Ok(Period::Light),
            other => Err(format!("unknown period '{other}'")),
        }
    }
}

/// One table row: six component percentages for a period and class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionRow {
    pub period: Period,
    pub class: Sector,
    pub percent: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompositionTable {
    pub rows: Vec<CompositionRow>,
}

impl Default for CompositionTable {
    fn default() -> Self {
        use Period::*;
        use Sector::*;
        let industrial = [13.0, 22.0, 16.0, 0.0, 27.0, 22.0];
        let rows = [
            (Peak, Residential, [8.0, 7.0, 2.0, 34.0, 15.0, 34.0]),
            (Peak, Commercial, [12.0, 10.0, 4.0, 25.0, 18.0, 31.0]),
            (Peak, Industrial, industrial),
            (Shoulder, Residential, [8.0, 7.0, 2.0, 25.0, 19.0, 39.0]),
            (Shoulder, Commercial, [12.0, 10.0, 4.0, 20.0, 23.0, 31.0]),
            (Shoulder, Industrial, industrial),
            (Light, Residential, [10.0, 8.0, 2.0, 0.0, 40.0, 40.0]),
            (Light, Commercial, [12.0, 10.0, 4.0, 5.0, 38.0, 31.0]),
            (Light, Industrial, industrial),
        ];
        CompositionTable {
            rows: rows.into_iter().map(|(period, class, percent)| CompositionRow { period, class, percent }).collect(),
        }
    }
}

impl CompositionTable {
    pub fn row(&self, period: Period, class: Sector) -> Result<&[f64; 6], CompositionError> {
        self.rows
            .iter()
            .find(|r| r.period == period && r.class == class)
            .map(|r| &r.percent)
            .ok_or(CompositionError::MissingRow { period, class: class.name() })
    }

    /// Rows must be nonnegative, sum to 100 within 0.5 and be unique.
    pub fn validate(&self) -> Result<(), CompositionError> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.percent.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(CompositionError::InvalidTable(format!(
                    "{}/{} has a negative or non-finite entry",
                    r.period,
                    r.class.name()
                )));
            }
            let sum: f64 = r.percent.iter().sum();
            if (sum - 100.0).abs() > 0.5 {
                return Err(CompositionError::InvalidTable(format!(
                    "{}/{} sums to {sum}, expected 100",
                    r.period,
                    r.class.name()
                )));
            }
            if self.rows[..i].iter().any(|o| o.period == r.period && o.class == r.class) {
                return Err(CompositionError::InvalidTable(format!("duplicate row {}/{}", r.period, r.class.name())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusComposition {
    pub bus_id: u32,
    pub period: Period,
    /// Motor A-D, electronic, static; sums to 1.
    pub fractions: [f64; 6],
}

/// Class-share weighted mix of the period's rows, in percent.
pub fn mix_percentages(
    rci: &RciRatio,
    period: Period,
    table: &CompositionTable,
) -> Result<[f64; 6], CompositionError> {
    let mut out = [0.0; 6];
    for class in Sector::ALL {
        let share = rci.share(class);
        let row = table.row(period, class)?;
        if share == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(row) {
            *o += share * p;
        }
    }
    Ok(out)
}

pub fn compose(bus: &Bus, period: Period, table: &CompositionTable) -> Result<BusComposition, CompositionError> {
    let rci = &bus.rci_ratio;
    if rci.0.iter().any(|r| !r.is_finite() || *r < 0.0) || (rci.sum() - 1.0).abs() > 1e-6 {
        return Err(CompositionError::InvalidBus { bus: bus.id, message: format!("rci ratio {:?} must sum to 1", rci.0) });
    }
    let mixed = mix_percentages(rci, period, table)?;
    let total: f64 = mixed.iter().sum();
    if total <= 0.0 {
        return Err(CompositionError::InvalidBus { bus: bus.id, message: "mixed composition is empty".into() });
    }
    Ok(BusComposition { bus_id: bus.id, period, fractions: mixed.map(|m| m / total) })
}

/// Half-open hour window `[start_hour, end_hour)`; wraps through midnight
/// when `start_hour > end_hour`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodWindow {
    pub period: Period,
    pub start_hour: u32,
    pub end_hour: u32,
}

impl PeriodWindow {
    pub fn contains(&self, hour: u32) -> bool {
        if self.start_hour <= self.end_hour {
            (self.start_hour..self.end_hour).contains(&hour)
        } else {
            hour >= self.start_hour || hour < self.end_hour
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodSchedule {
    pub windows: Vec<PeriodWindow>,
}

impl Default for PeriodSchedule {
    fn default() -> Self {
        let w = |period, start_hour, end_hour| PeriodWindow { period, start_hour, end_hour };
        PeriodSchedule {
            windows: vec![
                w(Period::Light, 22, 7),
                w(Period::Shoulder, 7, 14),
                w(Period::Peak, 14, 19),
                w(Period::Shoulder, 19, 22),
            ],
        }
    }
}

impl PeriodSchedule {
    /// Every hour of the day must fall in exactly one window.
    pub fn validate(&self) -> Result<(), CompositionError> {
        for w in &self.windows {
            if w.start_hour >= 24 || w.end_hour > 24 || w.start_hour == w.end_hour {
                return Err(CompositionError::InvalidWindows(format!(
                    "{} window {}-{} is empty or out of range",
                    w.period, w.start_hour, w.end_hour
                )));
            }
        }
        for hour in 0..24 {
            let hits: Vec<&PeriodWindow> = self.windows.iter().filter(|w| w.contains(hour)).collect();
            match hits.len() {
                0 => return Err(CompositionError::InvalidWindows(format!("hour {hour} is not covered"))),
                1 => {}
                _ => {
                    return Err(CompositionError::InvalidWindows(format!(
                        "hour {hour} is covered by {} windows",
                        hits.len()
                    )))
                }
            }
        }
        Ok(())
    }
}

pub fn classify_period(hour_of_day: u32, schedule: &PeriodSchedule) -> Result<Period, CompositionError> {
    if hour_of_day >= 24 {
        return Err(CompositionError::InvalidHour(hour_of_day));
    }
    schedule.validate()?;
    Ok(schedule.windows.iter().find(|w| w.contains(hour_of_day)).expect("validated schedule").period)
}

/// Composition of every bus for one period.
pub fn compose_case(
    buses: &[Bus],
    period: Period,
    table: &CompositionTable,
) -> Result<Vec<BusComposition>, CompositionError> {
    table.validate()?;
    buses.iter().map(|b| compose(b, period, table)).collect()
}

pub fn write_composition_csv<W: Write>(writer: W, rows: &[BusComposition]) -> Result<(), CompositionError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CompositionError::Io(std::io::Error::other(e));
    let mut header = vec!["bus_id", "period"];
    header.extend(COMPONENT_NAMES);
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = vec![r.bus_id.to_string(), r.period.name().to_string()];
        rec.extend(r.fractions.iter().map(|f| format!("{f:.6}")));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
