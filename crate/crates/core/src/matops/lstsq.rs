use crate::matops::decomp::svd;
use crate::matops::{Mat, MatError};
use crate::Real;

/// Default relative singular-value cutoff for numerical rank.
pub const DEFAULT_RANK_RTOL: f64 = 1e-8;

/// Truncated-SVD least-squares factor of `A`, optionally in a weighted
/// solution metric `||diag(w) x||`.
///
/// `solve` returns the minimum-norm minimizer of `||A x - b||` in that metric.
/// `project` maps `x` to the minimum-norm point with the same image `A x`.
#[derive(Clone, Debug)]
pub struct LstsqFactor<T> {
    u: Mat<T>,
    s: Vec<T>,
    v: Mat<T>,
    rank: usize,
    weights: Option<Vec<T>>,
}

impl<T: Real> LstsqFactor<T> {
    pub fn new(a: &Mat<T>, rtol: T) -> Result<Self, MatError> {
        Self::build(a.clone(), rtol, None)
    }

    /// Weighted metric: columns of `a` are divided by `weights` before factoring.
    pub fn weighted(a: &Mat<T>, weights: &[T], rtol: T) -> Result<Self, MatError> {
        if weights.len() != a.cols() {
            return Err(MatError::Length {
                expected: a.cols(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(MatError::InvalidArgument("weights must be positive"));
        }
        let mut scaled = a.clone();
        for (j, &w) in weights.iter().enumerate() {
            scaled.col_mut(j).iter_mut().for_each(|x| *x /= w);
        }
        Self::build(scaled, rtol, Some(weights.to_vec()))
    }

    fn build(a: Mat<T>, rtol: T, weights: Option<Vec<T>>) -> Result<Self, MatError> {
        let d = svd(&a)?;
        let smax = d.s.first().copied().unwrap_or(T::zero());
        let cutoff = rtol * smax;
        let rank =
            d.s.iter()
                .take_while(|&&x| x > cutoff && x > T::zero())
                .count();
        Ok(Self {
            u: d.u,
            s: d.s,
            v: d.v,
            rank,
            weights,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    pub fn singular_values(&self) -> &[T] {
        &self.s
    }

    /// Smallest retained singular value, zero if nothing was retained.
    pub fn smallest_kept(&self) -> T {
        if self.rank == 0 {
            T::zero()
        } else {
            self.s[self.rank - 1]
        }
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, MatError> {
        if b.len() != self.rows() {
            return Err(MatError::Length {
                expected: self.rows(),
                got: b.len(),
            });
        }
        let n = self.cols();
        let mut y = vec![T::zero(); n];
        for k in 0..self.rank {
            let c = self.u.col(k).iter().zip(b).map(|(&u, &x)| u * x).sum::<T>() / self.s[k];
            for (yi, &vi) in y.iter_mut().zip(self.v.col(k)) {
                *yi += c * vi;
            }
        }
        if let Some(w) = &self.weights {
            y.iter_mut().zip(w).for_each(|(x, &w)| *x /= w);
        }
        Ok(y)
    }

    pub fn project(&self, x: &[T]) -> Result<Vec<T>, MatError> {
        let n = self.cols();
        if x.len() != n {
            return Err(MatError::Length {
                expected: n,
                got: x.len(),
            });
        }
        let xw: Vec<T> = match &self.weights {
            Some(w) => x.iter().zip(w).map(|(&a, &w)| a * w).collect(),
            None => x.to_vec(),
        };
        let mut y = vec![T::zero(); n];
        for k in 0..self.rank {
            let vk = self.v.col(k);
            let c: T = vk.iter().zip(&xw).map(|(&a, &b)| a * b).sum();
            for (yi, &vi) in y.iter_mut().zip(vk) {
                *yi += c * vi;
            }
        }
        if let Some(w) = &self.weights {
            y.iter_mut().zip(w).for_each(|(x, &w)| *x /= w);
        }
        Ok(y)
    }
}

/// Numerical rank with cutoff `rtol * sigma_max`.
pub fn numerical_rank<T: Real>(a: &Mat<T>, rtol: T) -> Result<usize, MatError> {
    Ok(LstsqFactor::new(a, rtol)?.rank())
}

/// Minimum-norm least-squares solution at the default cutoff.
pub fn lstsq<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>, MatError> {
    LstsqFactor::new(a, T::lit(DEFAULT_RANK_RTOL))?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overdetermined_full_rank_matches_normal_equations() {
        let a = Mat::<f64>::from_f64_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0], &[1.0, 3.0]]);
        let b = [1.0, 3.0, 5.2, 6.9];
        let x = lstsq(&a, &b).unwrap();
        let ata = a.tr_matmul(&a);
        let atb = a.tr_matvec(&b);
        let xn = crate::matops::solve(&ata, &atb).unwrap();
        for (p, q) in x.iter().zip(&xn) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_gives_min_norm() {
        let a = Mat::<f64>::from_f64_rows(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let f = LstsqFactor::new(&a, 1e-8).unwrap();
        assert_eq!(f.rank(), 1);
        let x = f.solve(&[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_metric_changes_min_norm_point() {
        // x0 + x1 = 2 with cost x0^2 + 4 x1^2 -> x = (1.6, 0.4)
        let a = Mat::<f64>::from_f64_rows(&[&[1.0, 1.0]]);
        let f = LstsqFactor::weighted(&a, &[1.0, 2.0], 1e-8).unwrap();
        let x = f.solve(&[2.0]).unwrap();
        assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 0.4).abs() < 1e-12);
        let p = f.project(&[2.0, 0.0]).unwrap();
        assert!((p[0] - 1.6).abs() < 1e-12 && (p[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn projection_preserves_image_and_is_idempotent() {
        let a = Mat::<f64>::from_f64_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[0.0, 1.0, 1.0]]);
        let f = LstsqFactor::weighted(&a, &[1.0, 1.5, 0.5], 1e-10).unwrap();
        let x = [0.3, -1.0, 2.0];
        let p = f.project(&x).unwrap();
        let pp = f.project(&p).unwrap();
        let (ax, ap) = (a.matvec(&x), a.matvec(&p));
        for i in 0..3 {
            assert!((ax[i] - ap[i]).abs() < 1e-12);
            assert!((p[i] - pp[i]).abs() < 1e-12);
        }
    }
}
