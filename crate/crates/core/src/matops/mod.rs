//! Dense matrix kernels and structured linear solvers.

mod decomp;
mod dense;
mod equations;
mod kron;
mod lstsq;
mod sym;

pub use decomp::{
    cholesky, condition_number, inverse, lambda_max, lambda_min, pivoted_cholesky, solve,
    spectral_norm, svd, sym_eigen, Lu, PivotedCholesky, Qr, Svd, SymEigen,
};
pub use dense::{dot, norm2, Mat};
pub use equations::{
    care_residual, hurwitz_certificate, is_hurwitz, solve_care_kleinman, solve_lyapunov,
    solve_sylvester, stabilizing_gain,
};
pub use kron::{kron, kron_vec, unvec, vec};
pub use lstsq::{lstsq, numerical_rank, LstsqFactor, DEFAULT_RANK_RTOL};
pub use sym::{duplication_map, frobenius_weights, half_len, SymMat};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatError {
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("linear system is numerically singular")]
    SingularSystem,
    #[error("malformed matrix text: {0}")]
    Parse(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("initial gain is not stabilizing")]
    NotStabilizing,
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("non-finite entries")]
    NonFinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}
