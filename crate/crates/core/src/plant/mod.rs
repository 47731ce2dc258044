//! Ground-truth plant, probing inputs, fixed-step integration and cost evaluation.

mod lti;
mod ode;
mod probing;
mod trajectory;
mod weights;

pub use lti::{controllability_matrix, observability_matrix, LtiPlant};
pub use ode::{simulate, CoupledOde, Rhs};
pub use probing::{make_probing, random_unit_vector, ProbingSignal, ProbingSpec, ProbingTerm};
pub use trajectory::{eval_cost, Sample, TrajectoryLog};
pub use weights::WeightSpec;

use thiserror::Error;

use crate::matops::MatError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("(A, B) is not controllable: rank {rank} < {n}")]
    NotControllable { rank: usize, n: usize },
    #[error("(C, A) is not observable: rank {rank} < {n}")]
    NotObservable { rank: usize, n: usize },
    #[error("Q must be positive semidefinite")]
    QNotPsd,
    #[error("R must be positive definite")]
    RNotPd,
    #[error("(sqrt(Q) C, A) is not observable")]
    WeightNotObservable,
    #[error("step size {dt} does not divide the sampling interval {interval}")]
    BadStep { dt: f64, interval: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error(transparent)]
    Mat(#[from] MatError),
}
