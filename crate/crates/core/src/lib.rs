//! Output-feedback value iteration for continuous-time linear systems.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`.

// Guards are written `!(x > 0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod matops;
pub mod plant;
pub mod realization;
mod scalar;
pub mod vi;

pub use scalar::Real;

pub type Mat64 = matops::Mat<f64>;
pub type SymMat64 = matops::SymMat<f64>;
pub type Mat32 = matops::Mat<f32>;
pub type SymMat32 = matops::SymMat<f32>;
pub type LtiPlant64 = plant::LtiPlant<f64>;
