use crate::matops::{numerical_rank, Mat, DEFAULT_RANK_RTOL};
use crate::plant::PlantError;
use crate::Real;

/// `x' = A x + B u`, `y = C x`, started at `x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiPlant<T> {
    a: Mat<T>,
    b: Mat<T>,
    c: Mat<T>,
    x0: Vec<T>,
}

/// `[B, AB, ..., A^{n-1}B]`.
pub fn controllability_matrix<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let n = a.rows();
    let mut blocks = vec![b.clone()];
    for k in 1..n {
        let next = a.matmul(&blocks[k - 1]);
        blocks.push(next);
    }
    let refs: Vec<&Mat<T>> = blocks.iter().collect();
    Mat::hstack(&refs)
}

/// `[C; CA; ...; CA^{n-1}]`.
pub fn observability_matrix<T: Real>(c: &Mat<T>, a: &Mat<T>) -> Mat<T> {
    controllability_matrix(&a.transpose(), &c.transpose()).transpose()
}

impl<T: Real> LtiPlant<T> {
    pub fn new(a: Mat<T>, b: Mat<T>, c: Mat<T>, x0: Vec<T>) -> Result<Self, PlantError> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || c.cols() != n || x0.len() != n {
            return Err(PlantError::Dimension(format!(
                "A {:?}, B {:?}, C {:?}, x0 len {}",
                a.shape(),
                b.shape(),
                c.shape(),
                x0.len()
            )));
        }
        if b.cols() == 0 || c.rows() == 0 {
            return Err(PlantError::Dimension(
                "B and C need at least one column/row".into(),
            ));
        }
        let rtol = T::lit(DEFAULT_RANK_RTOL);
        let rc = numerical_rank(&controllability_matrix(&a, &b), rtol)?;
        if rc < n {
            return Err(PlantError::NotControllable { rank: rc, n });
        }
        let ro = numerical_rank(&observability_matrix(&c, &a), rtol)?;
        if ro < n {
            return Err(PlantError::NotObservable { rank: ro, n });
        }
        Ok(Self { a, b, c, x0 })
    }

    /// Short-period longitudinal F-16 model: angle of attack, pitch rate, elevator state;
    /// the output is pitch rate in degrees.
    pub fn f16(x0: Vec<T>) -> Result<Self, PlantError> {
        let a = Mat::from_f64_rows(&[
            &[-1.01887, 0.90506, -0.00215],
            &[0.82225, -1.07741, -0.17555],
            &[0.0, 0.0, -20.2],
        ]);
        let b = Mat::column_vector(&[T::zero(), T::zero(), T::lit(20.2)]);
        let c = Mat::row_vector(&[T::zero(), T::lit(57.2958), T::zero()]);
        Self::new(a, b, c, x0)
    }

    pub fn a(&self) -> &Mat<T> {
        &self.a
    }

    pub fn b(&self) -> &Mat<T> {
        &self.b
    }

    pub fn c(&self) -> &Mat<T> {
        &self.c
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn p(&self) -> usize {
        self.c.rows()
    }

    pub fn with_x0(&self, x0: Vec<T>) -> Result<Self, PlantError> {
        if x0.len() != self.n() {
            return Err(PlantError::Dimension(format!(
                "x0 len {} for n = {}",
                x0.len(),
                self.n()
            )));
        }
        Ok(Self { x0, ..self.clone() })
    }

    pub fn output(&self, x: &[T]) -> Vec<T> {
        self.c.matvec(x)
    }

    /// Writes `A x + B u` into `dx`.
    pub fn derivative(&self, x: &[T], u: &[T], dx: &mut [T]) {
        let n = self.n();
        for (i, d) in dx.iter_mut().enumerate().take(n) {
            let mut s = T::zero();
            for (j, &xj) in x.iter().enumerate().take(n) {
                s += self.a[(i, j)] * xj;
            }
            for (k, &uk) in u.iter().enumerate() {
                s += self.b[(i, k)] * uk;
            }
            *d = s;
        }
    }
}
