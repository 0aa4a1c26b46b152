//! Synthetic grid input time series and phasor-measurement stream generation.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`grid`]: the static case (buses, zones, generators, wind farms, lines),
//!   great-circle distances and the correlation-versus-distance curve.
//! - [`demand`]: per-bus hourly loads from prototype profiles, minutely
//!   variation patterns from historical data, pattern-to-zone assignment and
//!   re-scaling to minute resolution.
//! - [`composition`]: composite-load component fractions per bus and period.
//! - [`wind`]: spatially correlated sub-minute wind speeds and farm output.
//! - [`emit`]: timeline merging, measurement noise, re-dispatch, power-flow
//!   snapshots and the `tsb` binary container.
//! - [`pipeline`]: configuration, file ingestion and the stage commands.

pub mod grid;
pub mod interp;
pub mod demand;
pub mod composition;
pub mod wind;
pub mod emit;
pub mod pipeline;
pub mod rng;
pub mod time;
