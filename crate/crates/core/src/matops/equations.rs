use crate::matops::decomp::{cholesky, inverse, Lu};
use crate::matops::sym::{half_len, SymMat};
use crate::matops::{kron, Mat, MatError};
use crate::Real;

const KLEINMAN_MAX_ITER: usize = 100;

fn require_square<T: Real>(a: &Mat<T>) -> Result<usize, MatError> {
    if a.is_square() {
        Ok(a.rows())
    } else {
        Err(MatError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        })
    }
}

fn require_shape<T: Real>(
    op: &'static str,
    m: &Mat<T>,
    shape: (usize, usize),
) -> Result<(), MatError> {
    if m.shape() == shape {
        Ok(())
    } else {
        Err(MatError::DimensionMismatch {
            op,
            left: shape,
            right: m.shape(),
        })
    }
}

/// Solves `T a - m T = w` through `(a^T ⊗ I - I ⊗ m) vec(T) = vec(w)`.
pub fn solve_sylvester<T: Real>(a: &Mat<T>, m: &Mat<T>, w: &Mat<T>) -> Result<Mat<T>, MatError> {
    let na = require_square(a)?;
    let nm = require_square(m)?;
    require_shape("solve_sylvester", w, (nm, na))?;
    let coeff = &kron(&a.transpose(), &Mat::identity(nm)) - &kron(&Mat::identity(na), m);
    let x = Lu::new(&coeff)?.solve(w.as_slice())?;
    Mat::from_col_major(nm, na, x)
}

/// Solves `a^T P + P a + q = 0` for symmetric `P`, unknowns in half-vectorized form.
pub fn solve_lyapunov<T: Real>(a: &Mat<T>, q: &SymMat<T>) -> Result<SymMat<T>, MatError> {
    let n = require_square(a)?;
    if q.dim() != n {
        return Err(MatError::DimensionMismatch {
            op: "solve_lyapunov",
            left: (n, n),
            right: (q.dim(), q.dim()),
        });
    }
    let len = half_len(n);
    let mut coeff = Mat::zeros(len, len);
    let basis = SymMat::<T>::zeros(n);
    for j in 0..n {
        for i in j..n {
            // F = E a, where E has ones at (i,j) and (j,i); column of the map is half(F + F^T).
            let mut f = Mat::zeros(n, n);
            for c in 0..n {
                f[(i, c)] += a[(j, c)];
                if i != j {
                    f[(j, c)] += a[(i, c)];
                }
            }
            let k = basis.index_of(i, j);
            let image = SymMat::from_mat(&(&f + &f.transpose()));
            coeff.col_mut(k).copy_from_slice(image.half_vec());
        }
    }
    let rhs: Vec<T> = q.half_vec().iter().map(|&x| -x).collect();
    let h = Lu::new(&coeff)?.solve(&rhs)?;
    SymMat::from_half(n, h)
}

/// Lyapunov certificate: the solution of `a^T P + P a + I = 0` when it is positive definite.
pub fn hurwitz_certificate<T: Real>(a: &Mat<T>) -> Result<SymMat<T>, MatError> {
    let n = require_square(a)?;
    let p = solve_lyapunov(a, &SymMat::identity(n))?;
    cholesky(&p.to_mat())?;
    Ok(p)
}

/// True iff every eigenvalue of `a` has negative real part, decided by a Lyapunov certificate.
pub fn is_hurwitz<T: Real>(a: &Mat<T>) -> bool {
    hurwitz_certificate(a).is_ok()
}

/// Residual `a^T P + P a - P b r^{-1} b^T P + q`.
pub fn care_residual<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    q: &SymMat<T>,
    r: &SymMat<T>,
    p: &SymMat<T>,
) -> Result<Mat<T>, MatError> {
    let pm = p.to_mat();
    let rinv = inverse(&r.to_mat())?;
    let pb = pm.matmul(b);
    let quad = pb.matmul(&rinv).matmul(&pb.transpose());
    let lin = a.tr_matmul(&pm);
    Ok(&(&(&lin + &lin.transpose()) - &quad) + &q.to_mat())
}

/// Stabilizing gain for `(a, b)` from the shifted controllability Gramian,
/// `K = b^T W^{-1}` with `(a + βI) W + W (a + βI)^T = 2 b b^T`.
pub fn stabilizing_gain<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>, MatError> {
    let n = require_square(a)?;
    if b.rows() != n {
        return Err(MatError::DimensionMismatch {
            op: "stabilizing_gain",
            left: (n, b.cols()),
            right: b.shape(),
        });
    }
    let beta = a.norm_fro() + T::one();
    let shifted = &(-a) - &Mat::identity(n).scale(beta);
    let q = SymMat::from_mat(&b.matmul(&b.transpose()).scale(T::two()));
    let w = solve_lyapunov(&shifted.transpose(), &q)?;
    let winv = inverse(&w.to_mat())?;
    Ok(b.tr_matmul(&winv))
}

// 1e-9 in double precision; single precision cannot reach that, so the floor scales with epsilon.
fn residual_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon().sqrt() * T::lit(10.0))
}

/// Kleinman policy iteration for the continuous-time Riccati equation
/// `a^T P + P a - P b r^{-1} b^T P + q = 0`. Returns `(P, K)` with `K = r^{-1} b^T P`.
pub fn solve_care_kleinman<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    q: &SymMat<T>,
    r: &SymMat<T>,
    k0: &Mat<T>,
) -> Result<(SymMat<T>, Mat<T>), MatError> {
    let n = require_square(a)?;
    let m = b.cols();
    require_shape("solve_care_kleinman", b, (n, m))?;
    require_shape("solve_care_kleinman", k0, (m, n))?;
    if q.dim() != n || r.dim() != m {
        return Err(MatError::DimensionMismatch {
            op: "solve_care_kleinman",
            left: (n, m),
            right: (q.dim(), r.dim()),
        });
    }
    let rm = r.to_mat();
    cholesky(&rm)?;
    let rinv = inverse(&rm)?;
    if !is_hurwitz(&(a - &b.matmul(k0))) {
        return Err(MatError::NotStabilizing);
    }
    let qm = q.to_mat();
    let mut k = k0.clone();
    let mut prev: Option<SymMat<T>> = None;
    for _ in 0..KLEINMAN_MAX_ITER {
        let acl = a - &b.matmul(&k);
        let qk = SymMat::from_mat(&(&qm + &k.tr_matmul(&rm).matmul(&k)));
        let p = solve_lyapunov(&acl, &qk).map_err(|e| match e {
            MatError::SingularSystem => MatError::NotStabilizing,
            other => other,
        })?;
        k = rinv.matmul(&b.tr_matmul(&p.to_mat()));
        let scale = T::one() + p.norm_fro();
        let done = prev
            .as_ref()
            .is_some_and(|pp| p.sub(pp).norm_fro() <= T::lit(1e-13) * scale);
        if done {
            let res = care_residual(a, b, q, r, &p)?.norm_fro();
            if res <= residual_tol::<T>() * scale {
                return Ok((p, k));
            }
        }
        if !p.is_finite() {
            return Err(MatError::NonFinite);
        }
        prev = Some(p);
    }
    // Iterates stalled above the step tolerance; accept if the residual is already small.
    let p = prev.expect("at least one iteration");
    let scale = T::one() + p.norm_fro();
    if care_residual(a, b, q, r, &p)?.norm_fro() <= residual_tol::<T>() * scale {
        Ok((p, k))
    } else {
        Err(MatError::NoConvergence {
            iterations: KLEINMAN_MAX_ITER,
        })
    }
}
