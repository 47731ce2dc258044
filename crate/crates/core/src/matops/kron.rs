use crate::matops::{Mat, MatError};
use crate::Real;

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Mat::zeros(ar * br, ac * bc);
    for ja in 0..ac {
        for ia in 0..ar {
            let s = a[(ia, ja)];
            if s == T::zero() {
                continue;
            }
            for jb in 0..bc {
                for ib in 0..br {
                    out[(ia * br + ib, ja * bc + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors: entry `i*b.len() + j` is `a[i]*b[j]`.
pub fn kron_vec<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Column stacking. Storage is already column-major, so this is a copy.
pub fn vec<T: Real>(m: &Mat<T>) -> Vec<T> {
    m.as_slice().to_vec()
}

/// Inverse of [`vec`].
pub fn unvec<T: Real>(v: &[T], rows: usize, cols: usize) -> Result<Mat<T>, MatError> {
    Mat::from_col_major(rows, cols, v.to_vec())
}
