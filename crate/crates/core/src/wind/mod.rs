//! Sub-minute, spatially correlated wind speeds and farm output.
//!
//! Statistics of short-term speed variation are learned from a secondly
//! record: each window is detrended against its endpoint line and
//! differenced, and the spread of the differences gives one sample of the
//! variation scale. For synthesis, a lattice of reference points covers the
//! farms. Each point draws a scale, generates Gaussian increments and sums
//! them into a variation path. A farm's variation is the correlation-weighted
//! mean of the paths of nearby points, added to the straight line between
//! consecutive 5-minute speeds. A logistic power curve with a high-speed
//! drop-off converts speed to output.

mod io;
mod lattice;
mod power;
mod synth;
mod variation;

pub use io::{
    read_secondly_wind, read_wind_5min, read_wind_csv, write_wind_csv, SecondlySegment, WindSpeedSeries5Min, WindTable,
};
pub use lattice::{build_reference_lattice, lattice_points, ReferenceLattice, DEFAULT_LATTICE_SPACING_KM};
pub use power::{farm_power_series, TurbineCurve};
pub use synth::{synthesize_farm_speeds, FarmSpeedSeries, FIVE_MINUTES_S};
pub use variation::{
    combine_speed, detrend_and_difference, estimate_sigma_distribution, farm_variations,
    synthesize_reference_variations, Detrended, LogNormalFit, SigmaDistribution, VariationOwner, VariationSeries,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WindError {
    #[error("failed to read wind data: {0}")]
    Io(#[from] std::io::Error),
    #[error("wind data record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("{0}")]
    InvalidInput(String),
    #[error("window needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("no valid windows of {window} samples in the secondly record")]
    NoWindows { window: usize },
    #[error("wind farm {farm} is not within correlation range of any reference point (nearest {nearest_km:.1} km)")]
    Coverage { farm: u32, nearest_km: f64 },
    #[error("turbine curve {id}: {message}")]
    InvalidCurve { id: u32, message: String },
}
