//! Value iteration: the model-based reference iteration and the data-driven
//! iteration on co-integrated regression data.

mod escape;
mod iterate;
mod regression;
mod schedule;
mod solver;

pub use escape::{EscapeSets, Membership};
pub use iterate::{
    data_vi, extract_controller, model_vi, write_history_csv, DataViOptions, HistoryRow,
    ModelViOptions, StopReason, ViOracle, ViOutcome,
};
pub use regression::{collect, Collection, RegressionAccumulator, RegressionData};
pub use schedule::StepSchedule;
pub use solver::{rank_check, OSolver, RankPolicy, RankReport};

use thiserror::Error;

use crate::matops::MatError;
use crate::plant::PlantError;
use crate::realization::RealizationError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViError {
    #[error(
        "regression rank {rank} < {needed} required; collect over a longer horizon or excite more"
    )]
    RankDeficient { rank: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("initial matrix must be positive definite")]
    InitialNotPositiveDefinite,
    #[error("malformed regression data: {0}")]
    Parse(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Realization(#[from] RealizationError),
}
