//! Configuration and the stage commands that turn input files into output
//! trees.
//!
//! Every command is a pure function of the configuration, the input files
//! and the seed. Outputs land under `output_dir` in one subdirectory per
//! stage, and `manifest.json` records SHA-256 digests of the inputs and
//! outputs of every stage that ran.

mod config;
mod fixtures;
mod manifest;
mod stages;

pub use config::{
    CompositionConfig, DemandConfig, OutputsConfig, PathsConfig, PipelineConfig, SigmaFit, StudyConfig, WindConfig,
};
pub use fixtures::{make_fixtures, mini40_case, FixtureSet};
pub use manifest::{sha256_hex, Manifest, StageRecord};
pub use stages::{cmd_all, cmd_compose, cmd_demand, cmd_emit, cmd_wind, run_command, Command};

use thiserror::Error;

use crate::composition::CompositionError;
use crate::demand::DemandError;
use crate::emit::EmitError;
use crate::grid::GridError;
use crate::wind::WindError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    /// Malformed or inconsistent input data.
    #[error("{stage}: {message}")]
    Input { stage: &'static str, message: String },
    /// Failure while computing or writing results.
    #[error("{stage}: {message}")]
    Runtime { stage: &'static str, message: String },
}

impl PipelineError {
    /// 1 for configuration and input problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Input { .. } => 1,
            PipelineError::Runtime { .. } => 2,
        }
    }

    pub(crate) fn input(stage: &'static str, message: impl ToString) -> Self {
        PipelineError::Input { stage, message: message.to_string() }
    }

    pub(crate) fn runtime(stage: &'static str, message: impl ToString) -> Self {
        PipelineError::Runtime { stage, message: message.to_string() }
    }
}

/// Sorts stage errors into input and runtime failures.
pub(crate) trait StageError: std::fmt::Display {
    fn is_input(&self) -> bool;

    fn at(self, stage: &'static str) -> PipelineError
    where
        Self: Sized,
    {
        if self.is_input() {
            PipelineError::input(stage, self)
        } else {
            PipelineError::runtime(stage, self)
        }
    }
}

impl StageError for GridError {
    fn is_input(&self) -> bool {
        !matches!(self, GridError::Io(_))
    }
}

impl StageError for DemandError {
    fn is_input(&self) -> bool {
        !matches!(self, DemandError::Io(_) | DemandError::Infeasible(_))
    }
}

impl StageError for WindError {
    fn is_input(&self) -> bool {
        !matches!(self, WindError::Io(_))
    }
}

impl StageError for CompositionError {
    fn is_input(&self) -> bool {
        !matches!(self, CompositionError::Io(_))
    }
}

impl StageError for EmitError {
    fn is_input(&self) -> bool {
        matches!(
            self,
            EmitError::InvalidTimeline(_)
                | EmitError::Coverage { .. }
                | EmitError::InvalidInput(_)
                | EmitError::Island { .. }
                | EmitError::UnknownChannel { .. }
                | EmitError::EmptySelection
        )
    }
}
