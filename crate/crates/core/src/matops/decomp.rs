//! Dense factorizations: LU, Cholesky (plain and pivoted), Householder QR,
//! one-sided Jacobi SVD and the cyclic Jacobi symmetric eigensolver.

use crate::matops::{dot, Mat, MatError};
use crate::Real;

const MAX_JACOBI_SWEEPS: usize = 80;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Mat<T>,
    piv: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Mat<T>) -> Result<Self, MatError> {
        if !a.is_square() {
            return Err(MatError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let tiny = scale * T::epsilon() * T::lit(n.max(1) as f64);
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, T::neg_infinity()),
                        |acc, x| if x.1 > acc.1 { x } else { acc },
                    );
            if !(pmax > tiny) {
                return Err(MatError::SingularSystem);
            }
            if p != k {
                piv.swap(p, k);
                for j in 0..n {
                    let t = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = t;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= d;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == T::zero() {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, MatError> {
        let n = self.dim();
        if b.len() != n {
            return Err(MatError::Length {
                expected: n,
                got: b.len(),
            });
        }
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for (k, xk) in x.iter().enumerate().take(i) {
                s -= self.lu[(i, k)] * *xk;
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for (k, xk) in x.iter().enumerate().skip(i + 1) {
                s -= self.lu[(i, k)] * *xk;
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn solve_mat(&self, b: &Mat<T>) -> Result<Mat<T>, MatError> {
        let mut out = Mat::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(b.col(j))?;
            out.col_mut(j).copy_from_slice(&x);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Mat<T>, MatError> {
        self.solve_mat(&Mat::identity(self.dim()))
    }

    pub fn determinant(&self) -> T {
        let n = self.dim();
        let mut det = (0..n).fold(T::one(), |acc, i| acc * self.lu[(i, i)]);
        // parity of the permutation
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                k = self.piv[k];
                len += 1;
            }
            if len % 2 == 0 {
                det = -det;
            }
        }
        det
    }
}

/// Solves `a x = b` for square `a`.
pub fn solve<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>, MatError> {
    Lu::new(a)?.solve(b)
}

pub fn inverse<T: Real>(a: &Mat<T>) -> Result<Mat<T>, MatError> {
    Lu::new(a)?.inverse()
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &Mat<T>) -> Result<Mat<T>, MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return Err(MatError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Outcome of a pivoted Cholesky sweep.
#[derive(Clone, Debug)]
pub struct PivotedCholesky<T> {
    /// `n x rank` factor with `P^T A P ≈ L L^T` in the pivoted order.
    pub factor: Mat<T>,
    /// `perm[k]` is the original index of pivot `k`.
    pub perm: Vec<usize>,
    pub rank: usize,
    /// True when the trailing Schur complement is negligible, i.e. the input is PSD within tolerance.
    pub psd: bool,
}

impl<T: Real> PivotedCholesky<T> {
    /// `L` with rows put back in the original order, so that `A ≈ L L^T`.
    pub fn unpermuted_factor(&self) -> Mat<T> {
        let n = self.factor.rows();
        let mut out = Mat::zeros(n, self.rank);
        for (k, &p) in self.perm.iter().enumerate() {
            for j in 0..self.rank {
                out[(p, j)] = self.factor[(k, j)];
            }
        }
        out
    }
}

/// Diagonal-pivoted Cholesky. Stops once the largest remaining diagonal
/// entry falls below `rtol * max(diag(a))` (absolute `rtol` if that is zero).
pub fn pivoted_cholesky<T: Real>(a: &Mat<T>, rtol: T) -> Result<PivotedCholesky<T>, MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut s = a.symmetric_part();
    let mut perm: Vec<usize> = (0..n).collect();
    let dmax = (0..n).map(|i| s[(i, i)].abs()).fold(T::zero(), T::max);
    let tol = if dmax > T::zero() { rtol * dmax } else { rtol };
    let mut rank = 0;
    for k in 0..n {
        let (p, d) = (k..n)
            .map(|i| (i, s[(i, i)]))
            .fold(
                (k, T::neg_infinity()),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        if d <= tol {
            break;
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                let t = s[(p, j)];
                s[(p, j)] = s[(k, j)];
                s[(k, j)] = t;
            }
            for i in 0..n {
                let t = s[(i, p)];
                s[(i, p)] = s[(i, k)];
                s[(i, k)] = t;
            }
        }
        let r = d.sqrt();
        s[(k, k)] = r;
        for i in k + 1..n {
            s[(i, k)] /= r;
        }
        for j in k + 1..n {
            let sjk = s[(j, k)];
            for i in k + 1..n {
                let v = s[(i, k)] * sjk;
                s[(i, j)] -= v;
            }
        }
        rank += 1;
    }
    // Trailing block is PSD-negligible when its diagonal is within tolerance of zero
    // and its off-diagonals obey the bound |s_ij| <= tol.
    let mut psd = true;
    for j in rank..n {
        if s[(j, j)] < -tol {
            psd = false;
        }
        for i in j + 1..n {
            if s[(i, j)].abs() > tol {
                psd = false;
            }
        }
    }
    let mut factor = Mat::zeros(n, rank);
    for j in 0..rank {
        for i in j..n {
            factor[(i, j)] = s[(i, j)];
        }
    }
    Ok(PivotedCholesky {
        factor,
        perm,
        rank,
        psd,
    })
}

/// Householder QR of a tall matrix (`rows >= cols`).
#[derive(Clone, Debug)]
pub struct Qr<T> {
    qr: Mat<T>,
    tau: Vec<T>,
}

impl<T: Real> Qr<T> {
    pub fn new(a: &Mat<T>) -> Result<Self, MatError> {
        let (m, n) = a.shape();
        if m < n {
            return Err(MatError::DimensionMismatch {
                op: "qr",
                left: (m, n),
                right: (n, n),
            });
        }
        let mut qr = a.clone();
        let mut tau = vec![T::zero(); n];
        for k in 0..n {
            let col = &qr.col(k)[k..];
            let alpha = col[0];
            let tail_sq: T = col[1..].iter().map(|&x| x * x).sum();
            if tail_sq == T::zero() {
                continue;
            }
            let norm = (alpha * alpha + tail_sq).sqrt();
            let beta = if alpha >= T::zero() { -norm } else { norm };
            let v0 = alpha - beta;
            tau[k] = (beta - alpha) / beta;
            {
                let c = qr.col_mut(k);
                for x in &mut c[k + 1..] {
                    *x /= v0;
                }
                c[k] = beta;
            }
            for j in k + 1..n {
                let (vk, cj) = two_cols(&mut qr, k, j);
                let mut s = cj[k];
                for i in k + 1..m {
                    s += vk[i] * cj[i];
                }
                s *= tau[k];
                cj[k] -= s;
                for i in k + 1..m {
                    cj[i] -= s * vk[i];
                }
            }
        }
        Ok(Self { qr, tau })
    }

    /// Upper-triangular `cols x cols` factor.
    pub fn r(&self) -> Mat<T> {
        let n = self.qr.cols();
        Mat::from_fn(
            n,
            n,
            |i, j| if i <= j { self.qr[(i, j)] } else { T::zero() },
        )
    }

    /// Applies `Q` to a vector of length `rows`.
    pub fn apply_q(&self, x: &mut [T]) {
        let (m, n) = self.qr.shape();
        for k in (0..n).rev() {
            self.reflect(k, m, x);
        }
    }

    /// Applies `Q^T` to a vector of length `rows`.
    pub fn apply_qt(&self, x: &mut [T]) {
        let (m, n) = self.qr.shape();
        for k in 0..n {
            self.reflect(k, m, x);
        }
    }

    fn reflect(&self, k: usize, m: usize, x: &mut [T]) {
        if self.tau[k] == T::zero() {
            return;
        }
        let v = self.qr.col(k);
        let mut s = x[k];
        for i in k + 1..m {
            s += v[i] * x[i];
        }
        s *= self.tau[k];
        x[k] -= s;
        for i in k + 1..m {
            x[i] -= s * v[i];
        }
    }

    /// Thin `rows x cols` orthonormal factor.
    pub fn q_thin(&self) -> Mat<T> {
        let (m, n) = self.qr.shape();
        let mut q = Mat::zeros(m, n);
        for j in 0..n {
            let c = q.col_mut(j);
            c[j] = T::one();
            self.apply_q(c);
        }
        q
    }
}

fn two_cols<T: Real>(m: &mut Mat<T>, a: usize, b: usize) -> (&[T], &mut [T]) {
    debug_assert!(a < b);
    let rows = m.rows();
    let (lo, hi) = m.as_mut_slice().split_at_mut(b * rows);
    (&lo[a * rows..(a + 1) * rows], &mut hi[..rows])
}

fn two_cols_mut<T: Real>(m: &mut Mat<T>, a: usize, b: usize) -> (&mut [T], &mut [T]) {
    debug_assert!(a < b);
    let rows = m.rows();
    let (lo, hi) = m.as_mut_slice().split_at_mut(b * rows);
    (&mut lo[a * rows..(a + 1) * rows], &mut hi[..rows])
}

/// Thin singular value decomposition `A = U diag(s) V^T`, singular values descending.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: Mat<T>,
    pub s: Vec<T>,
    pub v: Mat<T>,
}

/// One-sided Jacobi SVD, preceded by QR for tall inputs.
pub fn svd<T: Real>(a: &Mat<T>) -> Result<Svd<T>, MatError> {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    if !a.is_finite() {
        return Err(MatError::NonFinite);
    }
    let qr = Qr::new(a)?;
    let mut w = qr.r();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (wp, wq) = two_cols_mut(&mut w, p, q);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::two() * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = two_cols_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MatError::NoConvergence {
            iterations: MAX_JACOBI_SWEEPS,
        });
    }
    let mut sig: Vec<(usize, T)> = (0..n)
        .map(|j| (j, dot(w.col(j), w.col(j)).sqrt()))
        .collect();
    sig.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite singular values"));
    let mut u_r = Mat::zeros(n, n);
    let mut v_sorted = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &(j, sj)) in sig.iter().enumerate() {
        s.push(sj);
        v_sorted.col_mut(k).copy_from_slice(v.col(j));
        if sj > T::zero() {
            for (dst, &src) in u_r.col_mut(k).iter_mut().zip(w.col(j)) {
                *dst = src / sj;
            }
        }
    }
    // Q * [u_r; 0]
    let mut u = Mat::zeros(m, n);
    for k in 0..n {
        let c = u.col_mut(k);
        c[..n].copy_from_slice(u_r.col(k));
        qr.apply_q(c);
    }
    Ok(Svd { u, s, v: v_sorted })
}

#[inline]
fn rotate<T: Real>(xp: &mut [T], xq: &mut [T], c: T, s: T) {
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    /// Columns are the matching unit eigenvectors.
    pub vectors: Mat<T>,
}

/// Cyclic Jacobi eigensolver; only the symmetric part of `a` is used.
pub fn sym_eigen<T: Real>(a: &Mat<T>) -> Result<SymEigen<T>, MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(MatError::NonFinite);
    }
    let n = a.rows();
    let mut s = a.symmetric_part();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    let mut converged = n < 2;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: T = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| s[(i, j)] * s[(i, j)])
            .sum();
        let total = off + (0..n).map(|i| s[(i, i)] * s[(i, i)]).sum::<T>();
        if off <= eps * eps * total || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = s[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (s[(q, q)] - s[(p, p)]) / (T::two() * apq);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = c * t;
                // columns
                {
                    let (cp, cq) = two_cols_mut(&mut s, p, q);
                    rotate(cp, cq, c, sn);
                }
                // rows
                for j in 0..n {
                    let (x, y) = (s[(p, j)], s[(q, j)]);
                    s[(p, j)] = c * x - sn * y;
                    s[(q, j)] = sn * x + c * y;
                }
                let (vp, vq) = two_cols_mut(&mut v, p, q);
                rotate(vp, vq, c, sn);
            }
        }
    }
    if !converged {
        return Err(MatError::NoConvergence {
            iterations: MAX_JACOBI_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        s[(i, i)]
            .partial_cmp(&s[(j, j)])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&i| s[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.col_mut(k).copy_from_slice(v.col(i));
    }
    Ok(SymEigen { values, vectors })
}

/// Largest eigenvalue of the symmetric part of `a`.
pub fn lambda_max<T: Real>(a: &Mat<T>) -> Result<T, MatError> {
    Ok(*sym_eigen(a)?.values.last().unwrap_or(&T::zero()))
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn lambda_min<T: Real>(a: &Mat<T>) -> Result<T, MatError> {
    Ok(*sym_eigen(a)?.values.first().unwrap_or(&T::zero()))
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm<T: Real>(a: &Mat<T>) -> Result<T, MatError> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(T::zero());
    }
    Ok(svd(a)?.s[0])
}

/// 2-norm condition number; infinite when `a` is singular.
pub fn condition_number<T: Real>(a: &Mat<T>) -> Result<T, MatError> {
    let s = svd(a)?.s;
    let smin = *s.last().unwrap_or(&T::zero());
    Ok(if smin > T::zero() {
        s[0] / smin
    } else {
        T::infinity()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat<f64> {
        Mat::<f64>::from_f64_rows(&[
            &[4.0, -2.0, 1.0, 0.5],
            &[3.0, 6.0, -4.0, 2.0],
            &[2.0, 1.0, 8.0, -1.0],
            &[-1.0, 0.0, 2.0, 5.0],
        ])
    }

    fn assert_close(a: &Mat<f64>, b: &Mat<f64>, tol: f64) {
        let d = (a - b).max_abs();
        assert!(d <= tol, "difference {d:e} exceeds {tol:e}");
    }

    #[test]
    fn lu_solves_and_inverts() {
        let a = sample();
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = solve(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(u, v)| u - v).collect();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert_close(
            &a.matmul(&inverse(&a).unwrap()),
            &Mat::<f64>::identity(4),
            1e-12,
        );
    }

    #[test]
    fn lu_determinant_with_pivots() {
        let a = Mat::<f64>::from_f64_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(Lu::new(&a).unwrap().determinant(), -1.0);
        assert!((Lu::new(&sample()).unwrap().determinant() - 1474.0).abs() < 1e-9);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Mat::<f64>::from_f64_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(Lu::new(&a), Err(MatError::SingularSystem)));
    }

    #[test]
    fn cholesky_roundtrip_and_rejection() {
        let a = sample();
        let spd = a.tr_matmul(&a);
        let l = cholesky(&spd).unwrap();
        assert_close(&l.matmul(&l.transpose()), &spd, 1e-10);
        let indef = Mat::<f64>::diag(&[1.0, -1.0]);
        assert!(matches!(
            cholesky(&indef),
            Err(MatError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn pivoted_cholesky_detects_rank_and_sign() {
        let g = Mat::<f64>::from_f64_rows(&[&[1.0, 2.0], &[0.0, 1.0], &[3.0, -1.0], &[1.0, 1.0]]);
        let psd = g.matmul(&g.transpose());
        let pc = pivoted_cholesky(&psd, 1e-10).unwrap();
        assert_eq!(pc.rank, 2);
        assert!(pc.psd);
        let l = pc.unpermuted_factor();
        assert_close(&l.matmul(&l.transpose()), &psd, 1e-10);

        let indef = Mat::<f64>::from_f64_rows(&[&[1.0, 0.0], &[0.0, -1e-3]]);
        assert!(!pivoted_cholesky(&indef, 1e-10).unwrap().psd);
        let off =
            Mat::<f64>::from_f64_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        assert!(!pivoted_cholesky(&off, 1e-10).unwrap().psd);
    }

    #[test]
    fn qr_reconstructs() {
        let a = Mat::<f64>::from_f64_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0], &[7.0, 9.0]]);
        let qr = Qr::new(&a).unwrap();
        let q = qr.q_thin();
        assert_close(&q.matmul(&qr.r()), &a, 1e-12);
        assert_close(&q.tr_matmul(&q), &Mat::<f64>::identity(2), 1e-12);
    }

    #[test]
    fn svd_reconstructs_wide_and_rank_deficient() {
        let a = Mat::<f64>::from_f64_rows(&[
            &[1.0, 2.0, 3.0, 4.0],
            &[2.0, 4.0, 6.0, 8.0],
            &[1.0, 0.0, -1.0, 2.0],
        ]);
        let d = svd(&a).unwrap();
        let rebuilt = d.u.matmul(&Mat::<f64>::diag(&d.s)).matmul(&d.v.transpose());
        assert_close(&rebuilt, &a, 1e-12);
        assert!(d.s[2] < 1e-12 * d.s[0]);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn symmetric_eigen_known_spectrum() {
        let a = Mat::<f64>::from_f64_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 2.0]]);
        let e = sym_eigen(&a).unwrap();
        let r2 = 2f64.sqrt();
        let expected = [2.0 - r2, 2.0, 2.0 + r2];
        for (v, x) in e.values.iter().zip(expected) {
            assert!((v - x).abs() < 1e-12);
        }
        let av = a.matmul(&e.vectors);
        let vl = e.vectors.matmul(&Mat::<f64>::diag(&e.values));
        assert_close(&av, &vl, 1e-12);
    }

    #[test]
    fn spectral_norm_and_condition() {
        let a = Mat::<f64>::diag(&[3.0, -0.5, 1.0]);
        assert!((spectral_norm(&a).unwrap() - 3.0).abs() < 1e-14);
        assert!((condition_number(&a).unwrap() - 6.0).abs() < 1e-12);
    }
}
