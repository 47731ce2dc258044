use crate::matops::{pivoted_cholesky, sym_eigen, SymMat};
use crate::Real;

/// How membership in the `j`-th bounded set is decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Membership {
    /// Positive semidefinite with `λ_max <= bound(j)`.
    #[default]
    PsdBall,
    /// Spectral norm `<= bound(j)`, no sign requirement.
    NormBall,
}

/// Nested bounded sets with radius `scale * growth^j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapeSets<T> {
    pub scale: T,
    pub growth: T,
    pub membership: Membership,
}

impl<T: Real> Default for EscapeSets<T> {
    fn default() -> Self {
        Self {
            scale: T::lit(5.0),
            growth: T::two(),
            membership: Membership::PsdBall,
        }
    }
}

const REL_TOL: f64 = 1e-6;

impl<T: Real> EscapeSets<T> {
    pub fn bound(&self, j: usize) -> T {
        self.scale * self.growth.powi(j.min(i32::MAX as usize) as i32)
    }

    pub fn contains(&self, p: &SymMat<T>, j: usize) -> bool {
        if !p.is_finite() {
            return false;
        }
        let m = p.to_mat();
        let Ok(eig) = sym_eigen(&m) else {
            return false;
        };
        let lo = eig.values.first().copied().unwrap_or(T::zero());
        let hi = eig.values.last().copied().unwrap_or(T::zero());
        let limit = self.bound(j) * (T::one() + T::lit(REL_TOL));
        match self.membership {
            Membership::NormBall => hi.abs().max(lo.abs()) <= limit,
            Membership::PsdBall => {
                hi <= limit
                    && pivoted_cholesky(&m, T::lit(1e-12))
                        .map(|c| c.psd)
                        .unwrap_or(false)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::Mat;

    #[test]
    fn bounds_and_membership() {
        let e = EscapeSets::<f64>::default();
        assert_eq!(e.bound(0), 5.0);
        assert_eq!(e.bound(3), 40.0);
        let p = SymMat::scaled_identity(3, 6.0);
        assert!(!e.contains(&p, 0));
        assert!(e.contains(&p, 1));
        let indefinite = SymMat::from_mat(&Mat::<f64>::diag(&[1.0, -1.0]));
        assert!(!e.contains(&indefinite, 5));
        let norm = EscapeSets {
            membership: Membership::NormBall,
            ..e
        };
        assert!(norm.contains(&indefinite, 0));
        assert!(!norm.contains(&SymMat::from_mat(&Mat::diag(&[-7.0, 0.0])), 0));
    }
}
