use crate::matops::{frobenius_weights, half_len, LstsqFactor, Mat, SymMat};
use crate::vi::{RegressionData, ViError};
use crate::Real;

/// What to do when the regression matrix is rank deficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RankPolicy {
    /// Refuse to iterate.
    #[default]
    Strict,
    /// Use the minimum-Frobenius-norm solution on the identifiable subspace.
    MinNorm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    pub ok: bool,
    pub rank: usize,
    pub needed: usize,
    pub rows: usize,
    pub sigma_max: f64,
    pub smallest_kept: f64,
}

/// Regression matrix `I_zz S` acting on half-vectors: unique-product integrals
/// times their multiplicity (2 off the diagonal).
fn regression_matrix<T: Real>(reg: &RegressionData<T>) -> Mat<T> {
    let s = SymMat::<T>::zeros(reg.n_zeta);
    let mut a = reg.i_zz.clone();
    for j in 0..reg.n_zeta {
        for i in j + 1..reg.n_zeta {
            let k = s.index_of(i, j);
            a.col_mut(k).iter_mut().for_each(|x| *x *= T::two());
        }
    }
    a
}

fn report<T: Real>(f: &LstsqFactor<T>, n_zeta: usize, rows: usize) -> RankReport {
    let needed = half_len(n_zeta);
    RankReport {
        ok: f.rank() == needed,
        rank: f.rank(),
        needed,
        rows,
        sigma_max: f.singular_values().first().map_or(0.0, |s| s.as_f64()),
        smallest_kept: f.smallest_kept().as_f64(),
    }
}

/// Numerical rank of `I_zz S` with cutoff `rtol * sigma_max`.
pub fn rank_check<T: Real>(reg: &RegressionData<T>, rtol: T) -> Result<RankReport, ViError> {
    let f = LstsqFactor::weighted(
        &regression_matrix(reg),
        &frobenius_weights::<T>(reg.n_zeta),
        rtol,
    )?;
    Ok(report(&f, reg.n_zeta, reg.rows()))
}

/// Recovers `O = A'P + PA + C'QC` of the augmented system from data, reusing one factorization.
#[derive(Clone, Debug)]
pub struct OSolver<T> {
    factor: LstsqFactor<T>,
    report: RankReport,
    n_zeta: usize,
    m: usize,
    // δ_zz with multiplicities folded in, so row · half(P) = Δ(zeta' P zeta).
    d_weighted: Mat<T>,
    i_zu: Mat<T>,
    xi_q: Vec<T>,
    b_zeta: Mat<T>,
}

impl<T: Real> OSolver<T> {
    pub fn new(
        reg: &RegressionData<T>,
        q: &SymMat<T>,
        b_zeta: &Mat<T>,
        rtol: T,
        policy: RankPolicy,
    ) -> Result<Self, ViError> {
        if q.dim() != reg.p || b_zeta.shape() != (reg.n_zeta, reg.m) {
            return Err(ViError::Dimension(format!(
                "Q is {}x{}, B_zeta is {:?}; data has n_zeta = {}, m = {}, p = {}",
                q.dim(),
                q.dim(),
                b_zeta.shape(),
                reg.n_zeta,
                reg.m,
                reg.p
            )));
        }
        let a = regression_matrix(reg);
        let factor = LstsqFactor::weighted(&a, &frobenius_weights::<T>(reg.n_zeta), rtol)?;
        let report = report(&factor, reg.n_zeta, reg.rows());
        if !report.ok && policy == RankPolicy::Strict {
            return Err(ViError::RankDeficient {
                rank: report.rank,
                needed: report.needed,
            });
        }
        let mut d_weighted = reg.d_zz.clone();
        let s = SymMat::<T>::zeros(reg.n_zeta);
        for j in 0..reg.n_zeta {
            for i in j + 1..reg.n_zeta {
                let k = s.index_of(i, j);
                d_weighted
                    .col_mut(k)
                    .iter_mut()
                    .for_each(|x| *x *= T::two());
            }
        }
        let vq = q.to_mat();
        let xi_q = reg.i_yy.matvec(vq.as_slice());
        Ok(Self {
            factor,
            report,
            n_zeta: reg.n_zeta,
            m: reg.m,
            d_weighted,
            i_zu: reg.i_zu.clone(),
            xi_q,
            b_zeta: b_zeta.clone(),
        })
    }

    pub fn rank_report(&self) -> &RankReport {
        &self.report
    }

    pub fn n_zeta(&self) -> usize {
        self.n_zeta
    }

    /// Right-hand side `δ_zz vec(P) - 2 I_zu vec(B' P) + I_yy vec(Q)`.
    pub fn xi(&self, p: &SymMat<T>) -> Vec<T> {
        let bp = self.b_zeta.tr_matmul(&p.to_mat());
        debug_assert_eq!(bp.rows(), self.m);
        let delta = self.d_weighted.matvec(p.half_vec());
        let cross = self.i_zu.matvec(bp.as_slice());
        delta
            .iter()
            .zip(&cross)
            .zip(&self.xi_q)
            .map(|((&d, &c), &q)| d - T::two() * c + q)
            .collect()
    }

    pub fn solve_o(&self, p: &SymMat<T>) -> Result<SymMat<T>, ViError> {
        let h = self.factor.solve(&self.xi(p))?;
        Ok(SymMat::from_half(self.n_zeta, h)?)
    }

    /// Minimum-Frobenius-norm symmetric matrix with the same quadratic form on the excited subspace.
    pub fn project(&self, p: &SymMat<T>) -> Result<SymMat<T>, ViError> {
        let h = self.factor.project(p.half_vec())?;
        Ok(SymMat::from_half(self.n_zeta, h)?)
    }
}
