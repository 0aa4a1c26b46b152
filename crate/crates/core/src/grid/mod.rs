//! Static grid case: buses, zones, generators, wind farms, lines, plus the
//! geographic helpers and the correlation-versus-distance curve shared by the
//! demand and wind stages.

mod case;
mod curve;
mod geo;

pub use case::{
    Bus, BusRecord, CaseDocument, Generator, GridCase, Line, RciRatio, Sector, TurbineCurveParams, WindFarm, Zone,
    ZoneRecord, CASE_FORMAT_VERSION,
};
pub use curve::{CorrelationCurve, CurveSegment};
pub use geo::{great_circle_distance, GeoPoint, EARTH_RADIUS_KM};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("failed to read case file: {0}")]
    Io(#[from] std::io::Error),
    #[error("case parse error: {0}")]
    Parse(String),
    #[error("unsupported case format_version {0} (expected {CASE_FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("invalid {entity}: {message}")]
    Validation { entity: String, message: String },
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("distance must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("invalid correlation curve: {0}")]
    InvalidCurve(String),
}

impl GridError {
    pub(crate) fn validation(entity: impl Into<String>, message: impl Into<String>) -> Self {
        GridError::Validation { entity: entity.into(), message: message.into() }
    }
}

/// Loads and validates a case file.
pub fn load_grid_case(path: impl AsRef<std::path::Path>) -> Result<GridCase, GridError> {
    let text = std::fs::read_to_string(path)?;
    GridCase::from_toml_str(&text)
}

pub fn save_grid_case(case: &GridCase, path: impl AsRef<std::path::Path>) -> Result<(), GridError> {
    std::fs::write(path, case.to_toml_string()?)?;
    Ok(())
}
