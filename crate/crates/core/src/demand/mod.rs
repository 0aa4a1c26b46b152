//! Demand-side synthesis.
//!
//! Hourly per-bus loads are built bottom-up from the geographically nearest
//! residential, commercial and industrial prototype profiles
//! ([`fit_bus_weights`]). Minute-level variation comes from historical
//! minutely data: each day's study hour is normalized by its endpoint line
//! ([`scale_day_hour`]), the normalized samples are clustered
//! ([`extract_patterns`]), clusters are assigned to zones so that nearby zones
//! share similar patterns ([`assign_patterns`]), and each bus's hourly curve is
//! modulated by its zone's pattern ([`rescale_hour`]).

mod assignment;
mod io;
mod kmeans;
mod rescale;
mod scaling;
mod weights;

pub use assignment::{
    assign_patterns, assign_with_distances, assignment_entropy, greedy_assignment, multinomial_count,
    zone_cardinalities, AnnealConfig, AssignmentConfig, SolverMethod, ZoneAssignment,
};
pub use io::{
    read_load_history, read_minutely_csv, read_prototype, write_minutely_csv, DayWindow, HistoryDay, MinuteLoadTable,
};
pub use kmeans::{cluster_distance, extract_patterns, KMeansConfig, LoadPatternLibrary};
pub use rescale::{apply_forecast_noise, rescale_bus_window, rescale_hour, rescale_window, MinutelyBusLoad};
pub use scaling::{collect_scaled_samples, scale_day_hour, ScaledLoadSample};
pub use weights::{
    fit_bus_weights, hourly_bus_load, nearest_prototypes, FitTolerance, HourlyBusLoad, PrototypeProfile, WeightFit,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate input: endpoint line is {value} at minute {minute}")]
    Degenerate { minute: usize, value: f64 },
    #[error("cannot form {k} clusters from {d} samples")]
    TooFewSamples { k: usize, d: usize },
    #[error("infeasible assignment: {0}")]
    Infeasible(String),
    #[error("hour {hour} needs hour {next} but the hourly series has {len} values; extend the hourly series")]
    MissingHour { hour: usize, next: usize, len: usize },
}
