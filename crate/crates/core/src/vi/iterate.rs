use std::io::{self, Write};

use crate::matops::{cholesky, inverse, Mat, SymMat};
use crate::vi::{EscapeSets, OSolver, StepSchedule, ViError};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `||P~ - P|| / γ <= delta`.
    Converged,
    /// The iteration budget ran out first.
    IterationCap,
}

/// One iteration of the convergence history. Errors are relative Frobenius
/// errors against an attached reference and `None` without one.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow<T> {
    pub iter: usize,
    pub gamma: T,
    /// `||P~ - P|| / γ`, the quantity the stopping test compares with `delta`.
    pub resid: T,
    pub err_p: Option<T>,
    pub err_k: Option<T>,
    pub j: usize,
}

#[derive(Clone, Debug)]
pub struct ViOutcome<T> {
    pub p: SymMat<T>,
    pub k: Mat<T>,
    pub iterations: usize,
    pub resets: usize,
    pub j: usize,
    pub stop: StopReason,
    pub history: Vec<HistoryRow<T>>,
}

/// Reference solution for error tracking.
#[derive(Clone, Copy, Debug)]
pub struct ViOracle<'a, T> {
    pub p_star: &'a SymMat<T>,
    pub k_star: &'a Mat<T>,
}

impl<T: Real> ViOracle<'_, T> {
    fn errors(&self, p: &SymMat<T>, k: &Mat<T>) -> (T, T) {
        (
            p.sub(self.p_star).norm_fro() / self.p_star.norm_fro(),
            (k - self.k_star).norm_fro() / self.k_star.norm_fro(),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ModelViOptions<T> {
    pub schedule: StepSchedule,
    pub escape: EscapeSets<T>,
    pub delta: T,
    pub max_iter: usize,
}

impl<T: Real> Default for ModelViOptions<T> {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::default(),
            escape: EscapeSets::default(),
            delta: T::lit(1e-4),
            max_iter: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DataViOptions<T> {
    pub schedule: StepSchedule,
    pub escape: EscapeSets<T>,
    pub delta: T,
    pub max_iter: usize,
    /// Replace the seed and each candidate by their projections onto the data-identifiable subspace.
    pub project: bool,
}

impl<T: Real> Default for DataViOptions<T> {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::default(),
            escape: EscapeSets::default(),
            delta: T::lit(1e-4),
            max_iter: 200_000,
            project: false,
        }
    }
}

fn check_p0<T: Real>(p0: &SymMat<T>) -> Result<(), ViError> {
    cholesky(&p0.to_mat()).map_err(|_| ViError::InitialNotPositiveDefinite)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
/// Shared escape-set loop. `step(P)` returns the increment direction and the gain at `P`.
fn run<T: Real>(
    p0: &SymMat<T>,
    schedule: StepSchedule,
    escape: EscapeSets<T>,
    delta: T,
    max_iter: usize,
    oracle: Option<ViOracle<'_, T>>,
    mut step: impl FnMut(&SymMat<T>) -> Result<(SymMat<T>, Mat<T>), ViError>,
    mut post: impl FnMut(SymMat<T>) -> Result<SymMat<T>, ViError>,
) -> Result<ViOutcome<T>, ViError> {
    let mut p = p0.clone();
    let (mut j, mut resets) = (0, 0);
    let mut history = Vec::new();
    let mut i = 0;
    loop {
        let (dir, k) = step(&p)?;
        let (err_p, err_k) = match oracle {
            Some(o) => {
                let (ep, ek) = o.errors(&p, &k);
                (Some(ep), Some(ek))
            }
            None => (None, None),
        };
        let gamma: T = schedule.gamma(i);
        let cand = post(p.add(&dir.scale(gamma)))?;
        let moved = cand.sub(&p).norm_fro() / gamma;
        history.push(HistoryRow {
            iter: i,
            gamma,
            resid: moved,
            err_p,
            err_k,
            j,
        });
        if i >= max_iter {
            return Ok(ViOutcome {
                p,
                k,
                iterations: i,
                resets,
                j,
                stop: StopReason::IterationCap,
                history,
            });
        }
        if !escape.contains(&cand, j) {
            p = p0.clone();
            j += 1;
            resets += 1;
        } else if moved <= delta {
            return Ok(ViOutcome {
                p,
                k,
                iterations: i,
                resets,
                j,
                stop: StopReason::Converged,
                history,
            });
        } else {
            p = cand;
        }
        i += 1;
    }
}

/// Value iteration on a known model: `P <- P + γ (A'P + PA - P B R^{-1} B'P + C_q' C_q)`.
///
/// `c_q` is any factor with `c_q' c_q = C' Q C`. Hitting `max_iter` is reported
/// through [`StopReason::IterationCap`], with the last iterate.
pub fn model_vi<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    c_q: &Mat<T>,
    r: &SymMat<T>,
    p0: &SymMat<T>,
    opts: &ModelViOptions<T>,
    oracle: Option<ViOracle<'_, T>>,
) -> Result<ViOutcome<T>, ViError> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n || c_q.cols() != n || p0.dim() != n || r.dim() != b.cols() {
        return Err(ViError::Dimension("model_vi operands".into()));
    }
    check_p0(p0)?;
    let rinv = inverse(&r.to_mat())?;
    let q = c_q.tr_matmul(c_q);
    run(
        p0,
        opts.schedule,
        opts.escape,
        opts.delta,
        opts.max_iter,
        oracle,
        |p| {
            let pm = p.to_mat();
            let k = rinv.matmul(&b.tr_matmul(&pm));
            let lin = a.tr_matmul(&pm);
            let pb = pm.matmul(b);
            let res = &(&(&lin + &lin.transpose()) - &pb.matmul(&k)) + &q;
            Ok((SymMat::from_mat(&res), k))
        },
        Ok,
    )
}

/// Value iteration on data: `P <- P + γ (O(P) - K'RK)`, `K = R^{-1} B' P`,
/// with `O(P)` recovered by `solver`.
pub fn data_vi<T: Real>(
    solver: &OSolver<T>,
    r: &SymMat<T>,
    b_zeta: &Mat<T>,
    p0: &SymMat<T>,
    opts: &DataViOptions<T>,
    oracle: Option<ViOracle<'_, T>>,
) -> Result<ViOutcome<T>, ViError> {
    if p0.dim() != solver.n_zeta() || b_zeta.rows() != solver.n_zeta() || r.dim() != b_zeta.cols() {
        return Err(ViError::Dimension("data_vi operands".into()));
    }
    check_p0(p0)?;
    let rm = r.to_mat();
    let rinv = inverse(&rm)?;
    // With projection on, the start and reset point is the projected seed as well.
    let start = if opts.project {
        solver.project(p0)?
    } else {
        p0.clone()
    };
    run(
        &start,
        opts.schedule,
        opts.escape,
        opts.delta,
        opts.max_iter,
        oracle,
        |p| {
            let k = rinv.matmul(&b_zeta.tr_matmul(&p.to_mat()));
            let o = solver.solve_o(p)?;
            let krk = SymMat::from_mat(&k.tr_matmul(&rm).matmul(&k));
            Ok((o.sub(&krk), k))
        },
        |cand| {
            if opts.project {
                solver.project(&cand)
            } else {
                Ok(cand)
            }
        },
    )
}

/// Splits the learned gain into the filter part (first `n_z` columns) and the transverse part.
pub fn extract_controller<T: Real>(
    k_hat: &Mat<T>,
    n_z: usize,
) -> Result<(Mat<T>, Mat<T>), ViError> {
    if k_hat.cols() < n_z {
        return Err(ViError::Dimension(format!(
            "gain has {} columns, fewer than n_z = {n_z}",
            k_hat.cols()
        )));
    }
    let m = k_hat.rows();
    Ok((
        k_hat.block(0, 0, m, n_z),
        k_hat.block(0, n_z, m, k_hat.cols() - n_z),
    ))
}

/// Header `iter,gamma,resid,err_P,err_K,j`; error cells are empty without a reference.
pub fn write_history_csv<T: Real, W: Write>(rows: &[HistoryRow<T>], mut w: W) -> io::Result<()> {
    writeln!(w, "iter,gamma,resid,err_P,err_K,j")?;
    let cell = |v: Option<T>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{},{},{}",
            r.iter,
            r.gamma,
            r.resid,
            cell(r.err_p),
            cell(r.err_k),
            r.j
        )?;
    }
    Ok(())
}
