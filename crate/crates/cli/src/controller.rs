use ofvi_core::matops::Mat;
use ofvi_core::realization::{FilterBank, InputLaw};

use crate::CliError;

/// Dynamic output feedback `Z' = A_c Z + B_c [y; u]`, `u = -K_c vec(Z)`.
///
/// The controller state is the filter state itself; in simulation it is integrated by the
/// joint plant/filter ODE, which drives it from measured `(u, y)` only and starts it at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopController {
    pub a_c: Mat<f64>,
    pub b_c: Mat<f64>,
    pub k_c: Mat<f64>,
}

impl ClosedLoopController {
    pub fn new(filter: &FilterBank<f64>, k_z: Mat<f64>) -> Result<Self, CliError> {
        if k_z.shape() != (filter.m(), filter.n_z()) {
            return Err(CliError::Config(format!(
                "gain must be {}x{}, got {:?}",
                filter.m(),
                filter.n_z(),
                k_z.shape()
            )));
        }
        Ok(Self {
            a_c: filter.a_z().clone(),
            b_c: Mat::hstack(&[filter.l_z(), filter.b_xi()]),
            k_c: k_z,
        })
    }

    pub fn n_z(&self) -> usize {
        self.k_c.cols()
    }

    /// `u = -K_c vec(Z)`.
    pub fn control(&self, z: &[f64], u: &mut [f64]) {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = -(0..self.n_z())
                .map(|j| self.k_c[(i, j)] * z[j])
                .sum::<f64>();
        }
    }
}

impl InputLaw<f64> for ClosedLoopController {
    fn input(&mut self, _t: f64, zeta: &[f64], u: &mut [f64]) {
        self.control(&zeta[..self.n_z()], u);
    }
}
