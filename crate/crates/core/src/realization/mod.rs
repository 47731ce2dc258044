//! Kreisselmeier filter bank, the decaying transverse coordinate, the joint
//! plant/filter simulation, and a model-based reference realization used to
//! check the learner.

mod coupled;
mod filter;
mod oracle;

pub use coupled::{
    step_coupled, CoIntegrated, CoupledSystem, InputLaw, NoAccumulator, StateLayout,
};
pub use filter::FilterBank;
pub use oracle::{
    verify_gain_transfer, GainTransferReport, GammaChoice, OracleRealization, ThetaSource,
};

use thiserror::Error;

use crate::matops::MatError;
use crate::plant::PlantError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealizationError {
    #[error("bad filter matrix: {0}")]
    BadFilterMatrix(String),
    #[error("no well-conditioned T after {attempts} draws (last condition number {cond:e})")]
    IllConditionedT { attempts: usize, cond: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}
