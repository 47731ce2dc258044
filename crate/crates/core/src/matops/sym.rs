use crate::matops::{Mat, MatError};
use crate::Real;

/// Symmetric matrix stored as its lower triangle, column by column.
///
/// Entry `(i, j)` with `i >= j` lives at `j*dim - j*(j-1)/2 + (i - j)`.
/// Off-diagonal entries are stored once and carry no scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat<T> {
    dim: usize,
    half: Vec<T>,
}

/// Number of free entries of a `dim x dim` symmetric matrix.
pub const fn half_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[inline]
fn half_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * (2 * dim + 1 - j) / 2 + (i - j)
}

impl<T: Real> SymMat<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            half: vec![T::zero(); half_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.set(i, i, T::one());
        }
        s
    }

    pub fn scaled_identity(dim: usize, s: T) -> Self {
        let mut out = Self::identity(dim);
        out.half.iter_mut().for_each(|x| *x *= s);
        out
    }

    pub fn from_half(dim: usize, half: Vec<T>) -> Result<Self, MatError> {
        if half.len() != half_len(dim) {
            return Err(MatError::Length {
                expected: half_len(dim),
                got: half.len(),
            });
        }
        Ok(Self { dim, half })
    }

    /// Symmetrizes `(m + m^T)/2` and stores the result.
    pub fn from_mat(m: &Mat<T>) -> Self {
        assert!(m.is_square(), "SymMat::from_mat needs a square matrix");
        let n = m.rows();
        let half_w = T::lit(0.5);
        let mut s = Self::zeros(n);
        for j in 0..n {
            for i in j..n {
                s.set(i, j, (m[(i, j)] + m[(j, i)]) * half_w);
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_vec(&self) -> &[T] {
        &self.half
    }

    pub fn into_half_vec(self) -> Vec<T> {
        self.half
    }

    #[inline]
    pub fn index_of(&self, i: usize, j: usize) -> usize {
        half_index(self.dim, i, j)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.half[half_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = half_index(self.dim, i, j);
        self.half[k] = v;
    }

    pub fn to_mat(&self) -> Mat<T> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            half: self
                .half
                .iter()
                .zip(&other.half)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            half: self
                .half
                .iter()
                .zip(&other.half)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            half: self.half.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn norm_fro(&self) -> T {
        let mut acc = T::zero();
        for j in 0..self.dim {
            for i in j..self.dim {
                let v = self.get(i, j);
                acc += if i == j { v * v } else { T::two() * v * v };
            }
        }
        acc.sqrt()
    }

    /// `x^T S x`.
    pub fn quad_form(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.dim);
        let mut acc = T::zero();
        for j in 0..self.dim {
            acc += self.get(j, j) * x[j] * x[j];
            for i in j + 1..self.dim {
                acc += T::two() * self.get(i, j) * x[i] * x[j];
            }
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.half.iter().all(|x| x.is_finite())
    }
}

/// Duplication matrix `S` with `vec(O) = S * half_vec(O)` for symmetric `O`.
pub fn duplication_map<T: Real>(dim: usize) -> Mat<T> {
    let mut s = Mat::zeros(dim * dim, half_len(dim));
    for j in 0..dim {
        for i in j..dim {
            let k = half_index(dim, i, j);
            s[(i + dim * j, k)] = T::one();
            s[(j + dim * i, k)] = T::one();
        }
    }
    s
}

/// Weights `w` with `||O||_F = ||diag(w) * half_vec(O)||`: one on the diagonal, sqrt(2) off it.
pub fn frobenius_weights<T: Real>(dim: usize) -> Vec<T> {
    let r2 = T::two().sqrt();
    let mut w = vec![r2; half_len(dim)];
    for i in 0..dim {
        w[half_index(dim, i, i)] = T::one();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout_is_lower_column_major() {
        let s: SymMat<f64> = SymMat::<f64>::zeros(3);
        let order: Vec<usize> = [(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)]
            .iter()
            .map(|&(i, j)| s.index_of(i, j))
            .collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(s.index_of(0, 2), s.index_of(2, 0));
    }

    #[test]
    fn duplication_dim1_and_dim2() {
        let s1: Mat<f64> = duplication_map(1);
        assert_eq!(s1.as_slice(), &[1.0]);
        let s2: Mat<f64> = duplication_map(2);
        // (o11, o21, o22) -> (o11, o21, o21, o22)
        let v = s2.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(v, vec![1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn frobenius_weights_match_norm() {
        let m = Mat::<f64>::from_f64_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 5.0], &[3.0, 5.0, 6.0]]);
        let s = SymMat::<f64>::from_mat(&m);
        let w: Vec<f64> = frobenius_weights(3);
        let weighted: f64 = s
            .half_vec()
            .iter()
            .zip(&w)
            .map(|(h, w)| (h * w).powi(2))
            .sum();
        assert!((weighted.sqrt() - m.norm_fro()).abs() < 1e-12);
        assert!((s.norm_fro() - m.norm_fro()).abs() < 1e-12);
    }
}
