//! Measurement emission: load and wind series on a common timeline, load
//! measurement noise, periodic re-dispatch, a power-flow snapshot per
//! instant and the `tsb` frame container.

mod dispatch;
mod export;
mod frame;
mod inputs;
mod powerflow;
mod run;
mod timeline;
pub mod tsb;

pub use dispatch::{allocate_dispatch, redispatch, DispatchState};
pub use export::{export_csv, format_significant};
pub use frame::{channel_directory, frames_to_tsb, upsample, MeasurementFrame, UpsampleConfig};
pub use inputs::{build_timeline_inputs, InjectionTable};
pub use powerflow::{BusKind, Network, PowerFlowSolution, SolutionKind, SolverConfig};
pub use run::{run_emission, EmissionRun, EmitConfig};
pub use timeline::Timeline;
pub use tsb::{read_tsb, write_tsb, TsbChannel, TsbError, TsbFile, TsbFrame, Unit};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
    #[error("{series} has no data at {instant}")]
    Coverage { series: String, instant: String },
    #[error("{0}")]
    InvalidInput(String),
    #[error("dispatchable capacity is short by {shortfall_mw:.3} MW")]
    Infeasible { shortfall_mw: f64 },
    #[error("minimum generation exceeds the dispatch target by {excess_mw:.3} MW")]
    Overgeneration { excess_mw: f64 },
    #[error("buses {buses:?} are not connected to the slack bus")]
    Island { buses: Vec<u32> },
    #[error("singular Jacobian at iteration {iteration}; mismatch trace {trace:?}")]
    SingularJacobian { iteration: usize, trace: Vec<f64> },
    #[error("unknown channel '{name}'; available: {}", available.join(", "))]
    UnknownChannel { name: String, available: Vec<String> },
    #[error("channel selection is empty")]
    EmptySelection,
    #[error(transparent)]
    Tsb(#[from] TsbError),
}
