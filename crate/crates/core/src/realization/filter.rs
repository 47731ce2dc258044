use crate::matops::{kron, vec, Mat};
use crate::realization::RealizationError;
use crate::Real;

/// Filter `Z' = M Z + [y' ⊗ I_n, u' ⊗ I_n]` with triangular Hurwitz `M`,
/// together with its vectorized matrices and the diagonal transverse dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank<T> {
    n: usize,
    m: usize,
    p: usize,
    m_mat: Mat<T>,
    lambda_m: Vec<T>,
    eigvecs: Mat<T>,
    a_z: Mat<T>,
    b_xi: Mat<T>,
    l_z: Mat<T>,
}

impl<T: Real> FilterBank<T> {
    /// `m_mat` must be lower or upper triangular with distinct negative diagonal entries.
    pub fn build(n: usize, m: usize, p: usize, m_mat: Mat<T>) -> Result<Self, RealizationError> {
        if n == 0 || m == 0 || p == 0 {
            return Err(RealizationError::Dimension(
                "n, m, p must be positive".into(),
            ));
        }
        if m_mat.shape() != (n, n) {
            return Err(RealizationError::BadFilterMatrix(format!(
                "expected {n}x{n}, got {:?}",
                m_mat.shape()
            )));
        }
        let lower = (0..n).all(|j| (0..j).all(|i| m_mat[(i, j)] == T::zero()));
        let upper = (0..n).all(|j| (j + 1..n).all(|i| m_mat[(i, j)] == T::zero()));
        if !lower && !upper {
            return Err(RealizationError::BadFilterMatrix("not triangular".into()));
        }
        let lambda_m = m_mat.diagonal();
        if let Some(l) = lambda_m.iter().find(|l| !(**l < T::zero())) {
            return Err(RealizationError::BadFilterMatrix(format!(
                "diagonal entry {l} is not negative"
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                if lambda_m[i] == lambda_m[j] {
                    return Err(RealizationError::BadFilterMatrix(format!(
                        "repeated diagonal entry {}",
                        lambda_m[i]
                    )));
                }
            }
        }
        let eigvecs = triangular_eigenvectors(&m_mat, lower);
        let nt = (p + m) * n;
        let a_z = kron(&Mat::identity(nt), &m_mat);
        let vec_i = Mat::column_vector(&vec(&Mat::<T>::identity(n)));
        let n2 = n * n;
        let mut l_z = Mat::zeros(n2 * (p + m), p);
        l_z.set_block(0, 0, &kron(&Mat::identity(p), &vec_i));
        let mut b_xi = Mat::zeros(n2 * (p + m), m);
        b_xi.set_block(p * n2, 0, &kron(&Mat::identity(m), &vec_i));
        Ok(Self {
            n,
            m,
            p,
            m_mat,
            lambda_m,
            eigvecs,
            a_z,
            b_xi,
            l_z,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Columns of the filter state `Z`, `(p + m) n`.
    pub fn n_tilde_z(&self) -> usize {
        (self.p + self.m) * self.n
    }

    /// Length of `vec(Z)`, `(p + m) n^2`.
    pub fn n_z(&self) -> usize {
        self.n * self.n_tilde_z()
    }

    /// Length of `zeta = [vec(Z); eps]`.
    pub fn n_zeta(&self) -> usize {
        self.n_z() + self.n
    }

    pub fn m_mat(&self) -> &Mat<T> {
        &self.m_mat
    }

    pub fn lambda_m(&self) -> &[T] {
        &self.lambda_m
    }

    pub fn lambda_mat(&self) -> Mat<T> {
        Mat::diag(&self.lambda_m)
    }

    /// Eigenvectors of `M` (columns, unit pivot entry), so `M V = V diag(lambda_m)`.
    pub fn eigvecs(&self) -> &Mat<T> {
        &self.eigvecs
    }

    pub fn a_z(&self) -> &Mat<T> {
        &self.a_z
    }

    pub fn b_xi(&self) -> &Mat<T> {
        &self.b_xi
    }

    pub fn l_z(&self) -> &Mat<T> {
        &self.l_z
    }

    /// `[B_xi; 0]`.
    pub fn b_zeta(&self) -> Mat<T> {
        let mut b = Mat::zeros(self.n_zeta(), self.m);
        b.set_block(0, 0, &self.b_xi);
        b
    }

    /// `[0; 1_n]`.
    pub fn zeta0(&self) -> Vec<T> {
        let mut z = vec![T::zero(); self.n_zeta()];
        z[self.n_z()..].fill(T::one());
        z
    }

    /// Vectorized filter derivative, exploiting the block-diagonal `A_z`.
    pub fn z_derivative(&self, z: &[T], y: &[T], u: &[T], dz: &mut [T]) {
        let n = self.n;
        for c in 0..self.n_tilde_z() {
            let zc = &z[c * n..(c + 1) * n];
            let dc = &mut dz[c * n..(c + 1) * n];
            for (i, d) in dc.iter_mut().enumerate() {
                let mut s = T::zero();
                for (j, &zj) in zc.iter().enumerate() {
                    s += self.m_mat[(i, j)] * zj;
                }
                *d = s;
            }
            let (j, r) = (c / n, c % n);
            dc[r] += if j < self.p { y[j] } else { u[j - self.p] };
        }
    }

    /// Matrix-form filter derivative `M Z + [y' ⊗ I, u' ⊗ I]`.
    pub fn z_derivative_matrix(&self, z: &Mat<T>, y: &[T], u: &[T]) -> Mat<T> {
        let n = self.n;
        let mut drive = Mat::zeros(n, self.n_tilde_z());
        for (j, &v) in y.iter().chain(u).enumerate() {
            drive.set_block(0, j * n, &Mat::identity(n).scale(v));
        }
        &self.m_mat.matmul(z) + &drive
    }

    pub fn eps_derivative(&self, eps: &[T], deps: &mut [T]) {
        for ((d, &e), &l) in deps.iter_mut().zip(eps).zip(&self.lambda_m) {
            *d = l * e;
        }
    }
}

// Unit-pivot eigenvectors of a triangular matrix with distinct diagonal, by substitution.
fn triangular_eigenvectors<T: Real>(mm: &Mat<T>, lower: bool) -> Mat<T> {
    let n = mm.rows();
    let mut v = Mat::zeros(n, n);
    for k in 0..n {
        let lam = mm[(k, k)];
        v[(k, k)] = T::one();
        if lower {
            for i in k + 1..n {
                let s: T = (k..i).map(|j| mm[(i, j)] * v[(j, k)]).sum();
                v[(i, k)] = s / (lam - mm[(i, i)]);
            }
        } else {
            for i in (0..k).rev() {
                let s: T = (i + 1..=k).map(|j| mm[(i, j)] * v[(j, k)]).sum();
                v[(i, k)] = s / (lam - mm[(i, i)]);
            }
        }
    }
    v
}
