//! Configuration-driven pipeline: collect data, check rank, learn, evaluate the
//! closed loop, and write every intermediate as CSV.

pub mod config;
pub mod controller;
pub mod pipeline;
pub mod report;

pub use config::{ExperimentConfig, PlantSpec};
pub use controller::ClosedLoopController;
pub use pipeline::{
    cmd_collect, cmd_evaluate, cmd_full, cmd_learn, cmd_oracle, collect_stage, evaluate_gain,
    learn_stage, oracle_bundle, ClosedLoopTrace, CollectSummary, EvalReport, LearnSummary,
    OracleBundle,
};
pub use report::RunReport;

use std::io;
use std::path::PathBuf;

use ofvi_core::matops::MatError;
use ofvi_core::plant::PlantError;
use ofvi_core::realization::RealizationError;
use ofvi_core::vi::ViError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("rank condition failed: rank {rank} of {needed} unknowns from {rows} rows (minimum accepted {min})")]
    Rank {
        rank: usize,
        needed: usize,
        rows: usize,
        min: usize,
    },
    #[error("closed loop unstable: {0}")]
    Unstable(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Realization(#[from] RealizationError),
    #[error(transparent)]
    Vi(ViError),
}

impl From<ViError> for CliError {
    fn from(e: ViError) -> Self {
        match e {
            ViError::RankDeficient { rank, needed } => CliError::Rank {
                rank,
                needed,
                rows: 0,
                min: needed,
            },
            other => CliError::Vi(other),
        }
    }
}

impl CliError {
    /// 2 for rank failure, 3 for instability, 4 for bad configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Rank { .. } => 2,
            CliError::Unstable(_) => 3,
            CliError::Config(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
