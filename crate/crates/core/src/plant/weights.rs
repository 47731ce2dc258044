use crate::matops::{cholesky, numerical_rank, pivoted_cholesky, Mat, SymMat, DEFAULT_RANK_RTOL};
use crate::plant::{observability_matrix, LtiPlant, PlantError};
use crate::Real;

/// Output and input weights of the quadratic cost `y'Qy + u'Ru`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSpec<T> {
    q: SymMat<T>,
    r: SymMat<T>,
}

impl<T: Real> WeightSpec<T> {
    pub fn new(q: SymMat<T>, r: SymMat<T>) -> Result<Self, PlantError> {
        if !pivoted_cholesky(&q.to_mat(), T::lit(1e-12))?.psd {
            return Err(PlantError::QNotPsd);
        }
        if cholesky(&r.to_mat()).is_err() {
            return Err(PlantError::RNotPd);
        }
        Ok(Self { q, r })
    }

    /// Like [`WeightSpec::new`], additionally requiring `(sqrt(Q) C, A)` observable.
    pub fn for_plant(q: SymMat<T>, r: SymMat<T>, plant: &LtiPlant<T>) -> Result<Self, PlantError> {
        if q.dim() != plant.p() || r.dim() != plant.m() {
            return Err(PlantError::Dimension(format!(
                "Q is {0}x{0}, R is {1}x{1}; plant has p = {2}, m = {3}",
                q.dim(),
                r.dim(),
                plant.p(),
                plant.m()
            )));
        }
        let w = Self::new(q, r)?;
        let sqc = w.sqrt_q_c(plant.c())?;
        let rank = numerical_rank(
            &observability_matrix(&sqc, plant.a()),
            T::lit(DEFAULT_RANK_RTOL),
        )?;
        if rank < plant.n() {
            return Err(PlantError::WeightNotObservable);
        }
        Ok(w)
    }

    pub fn q(&self) -> &SymMat<T> {
        &self.q
    }

    pub fn r(&self) -> &SymMat<T> {
        &self.r
    }

    /// `F C` with `F^T F = Q`, where `F^T` is the (pivoted) Cholesky factor of `Q`.
    pub fn sqrt_q_c(&self, c: &Mat<T>) -> Result<Mat<T>, PlantError> {
        let l = pivoted_cholesky(&self.q.to_mat(), T::lit(1e-12))?.unpermuted_factor();
        Ok(l.tr_matmul(c))
    }

    /// `C^T Q C`.
    pub fn state_weight(&self, c: &Mat<T>) -> SymMat<T> {
        SymMat::from_mat(&c.tr_matmul(&self.q.to_mat()).matmul(c))
    }

    /// Instantaneous cost `y'Qy + u'Ru`.
    pub fn stage_cost(&self, y: &[T], u: &[T]) -> T {
        self.q.quad_form(y) + self.r.quad_form(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_weights() {
        let neg = SymMat::from_mat(&Mat::<f64>::diag(&[-1.0]));
        assert!(matches!(
            WeightSpec::new(neg.clone(), SymMat::identity(1)),
            Err(PlantError::QNotPsd)
        ));
        assert!(matches!(
            WeightSpec::new(SymMat::<f64>::identity(1), SymMat::zeros(1)),
            Err(PlantError::RNotPd)
        ));
    }

    #[test]
    fn zero_output_weight_is_not_observable() {
        let plant = LtiPlant::<f64>::f16(vec![0.0; 3]).unwrap();
        let r = WeightSpec::for_plant(SymMat::zeros(1), SymMat::identity(1), &plant);
        assert!(matches!(r, Err(PlantError::WeightNotObservable)));
        assert!(WeightSpec::for_plant(SymMat::identity(1), SymMat::identity(1), &plant).is_ok());
    }

    #[test]
    fn sqrt_factor_reproduces_state_weight() {
        let q = SymMat::from_mat(&Mat::<f64>::from_f64_rows(&[&[2.0, 1.0], &[1.0, 2.0]]));
        let w = WeightSpec::new(q, SymMat::identity(1)).unwrap();
        let c = Mat::from_f64_rows(&[&[1.0, 0.0, 2.0], &[0.0, 3.0, 1.0]]);
        let f = w.sqrt_q_c(&c).unwrap();
        let d = (&f.tr_matmul(&f) - &w.state_weight(&c).to_mat()).max_abs();
        assert!(d < 1e-12);
    }
}
