use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matops::{
    condition_number, inverse, is_hurwitz, kron, solve_care_kleinman, solve_sylvester,
    stabilizing_gain, Mat, SymMat,
};
use crate::plant::{LtiPlant, WeightSpec};
use crate::realization::{FilterBank, RealizationError};
use crate::Real;

const MAX_T_COND: f64 = 1e8;
const THETA_DRAWS: usize = 10;

/// Where the free `n x p` parameter `Θ_y` of the filter realization comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ThetaSource<T> {
    /// Entries uniform on `[-1, 1]` from a ChaCha8 stream; the best-conditioned `T` of ten draws
    /// is kept, and construction fails if even that exceeds `1e8`.
    Seeded(u64),
    Given(Mat<T>),
}

/// Choice of the constant matrix `Γ` mapping `eps` into the filter error.
#[derive(Clone, Debug, PartialEq)]
pub enum GammaChoice<T> {
    /// `V diag(V^{-1} T x0)` with `V` the eigenvectors of `M`; makes `Γ eps(t) = e^{Mt} T x0`.
    MatchX0,
    Identity,
    Given(Mat<T>),
}

/// Model-derived non-minimal realization of a plant through its filter bank.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRealization<T> {
    pub t_mat: Mat<T>,
    pub t_inv: Mat<T>,
    pub theta_y: Mat<T>,
    pub theta: Vec<T>,
    pub pi: Mat<T>,
    pub a_xi: Mat<T>,
    pub b_xi: Mat<T>,
    pub c_xi: Mat<T>,
    pub l_z: Mat<T>,
    pub gamma: Mat<T>,
    pub a_zeta: Mat<T>,
    pub b_zeta: Mat<T>,
    pub c_zeta: Mat<T>,
    lambda: Mat<T>,
    c: Mat<T>,
}

impl<T: Real> OracleRealization<T> {
    pub fn construct(
        plant: &LtiPlant<T>,
        filter: &FilterBank<T>,
        theta: ThetaSource<T>,
        gamma: GammaChoice<T>,
    ) -> Result<Self, RealizationError> {
        let (n, p) = (plant.n(), plant.p());
        if filter.n() != n || filter.m() != plant.m() || filter.p() != p {
            return Err(RealizationError::Dimension(
                "filter does not match plant".into(),
            ));
        }
        let (theta_y, t_mat) = match theta {
            ThetaSource::Given(ty) => {
                if ty.shape() != (n, p) {
                    return Err(RealizationError::Dimension(format!("Θ_y must be {n}x{p}")));
                }
                let t = solve_sylvester(plant.a(), filter.m_mat(), &ty.matmul(plant.c()))?;
                (ty, t)
            }
            ThetaSource::Seeded(seed) => {
                // Keep the best-conditioned of a fixed number of draws: the realization
                // residuals scale with cond(T), so merely passing the bound is not enough.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut best: Option<(f64, Mat<T>, Mat<T>)> = None;
                for _ in 0..THETA_DRAWS {
                    let ty = Mat::from_fn(n, p, |_, _| T::lit(rng.gen_range(-1.0..1.0)));
                    let Ok(t) = solve_sylvester(plant.a(), filter.m_mat(), &ty.matmul(plant.c()))
                    else {
                        continue;
                    };
                    let cond = condition_number(&t)?.as_f64();
                    if best.as_ref().is_none_or(|b| cond < b.0) {
                        best = Some((cond, ty, t));
                    }
                }
                match best {
                    Some((cond, ty, t)) if cond <= MAX_T_COND => (ty, t),
                    other => {
                        return Err(RealizationError::IllConditionedT {
                            attempts: THETA_DRAWS,
                            cond: other.map_or(f64::INFINITY, |b| b.0),
                        })
                    }
                }
            }
        };
        let t_inv = inverse(&t_mat)?;
        let mut theta = theta_y.as_slice().to_vec();
        theta.extend_from_slice(t_mat.matmul(plant.b()).as_slice());
        let pi = kron(&Mat::row_vector(&theta), &t_inv);
        let c_xi = plant.c().matmul(&pi);
        let a_xi = filter.a_z() + &filter.l_z().matmul(&c_xi);
        let gamma = match gamma {
            GammaChoice::Identity => Mat::identity(n),
            GammaChoice::Given(g) => g,
            GammaChoice::MatchX0 => {
                let v = filter.eigvecs();
                let w = inverse(v)?.matvec(&t_mat.matvec(plant.x0()));
                v.matmul(&Mat::diag(&w))
            }
        };
        let mut out = Self {
            t_mat,
            t_inv,
            theta_y,
            theta,
            pi,
            a_xi,
            b_xi: filter.b_xi().clone(),
            c_xi,
            l_z: filter.l_z().clone(),
            gamma: Mat::zeros(n, n),
            a_zeta: Mat::zeros(0, 0),
            b_zeta: filter.b_zeta(),
            c_zeta: Mat::zeros(0, 0),
            lambda: filter.lambda_mat(),
            c: plant.c().clone(),
        };
        out.set_gamma(gamma)?;
        Ok(out)
    }

    /// Same realization with a different `Γ`.
    pub fn with_gamma(&self, gamma: Mat<T>) -> Result<Self, RealizationError> {
        let mut out = self.clone();
        out.set_gamma(gamma)?;
        Ok(out)
    }

    fn set_gamma(&mut self, gamma: Mat<T>) -> Result<(), RealizationError> {
        let n = self.t_mat.rows();
        if gamma.shape() != (n, n) {
            return Err(RealizationError::Dimension(format!("Γ must be {n}x{n}")));
        }
        let n_z = self.a_xi.rows();
        let ctg = self.c.matmul(&self.t_inv).matmul(&gamma);
        let mut a = Mat::zeros(n_z + n, n_z + n);
        a.set_block(0, 0, &self.a_xi);
        a.set_block(0, n_z, &self.l_z.matmul(&ctg));
        a.set_block(n_z, n_z, &self.lambda);
        self.a_zeta = a;
        self.c_zeta = Mat::hstack(&[&self.c_xi, &ctg]);
        self.gamma = gamma;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.t_mat.rows()
    }

    pub fn n_z(&self) -> usize {
        self.a_xi.rows()
    }

    /// `F = A_z` in the realization quadruple.
    pub fn f(&self) -> Mat<T> {
        &self.a_xi - &self.l_z.matmul(&self.c_xi)
    }

    pub fn g(&self) -> &Mat<T> {
        &self.b_xi
    }

    pub fn h(&self) -> &Mat<T> {
        &self.c_xi
    }

    pub fn l(&self) -> &Mat<T> {
        &self.l_z
    }

    /// Frobenius norms of `Π A_xi - A Π`, `Π B_xi - B` and `C_xi - C Π`.
    pub fn definition_residuals(&self, plant: &LtiPlant<T>) -> [T; 3] {
        [
            (&self.pi.matmul(&self.a_xi) - &plant.a().matmul(&self.pi)).norm_fro(),
            (&self.pi.matmul(&self.b_xi) - plant.b()).norm_fro(),
            (&self.c_xi - &plant.c().matmul(&self.pi)).norm_fro(),
        ]
    }

    /// Writes one CSV per matrix into `dir` and returns the paths.
    pub fn dump_csv(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let theta = Mat::column_vector(&self.theta);
        let items: [(&str, &Mat<T>); 11] = [
            ("T", &self.t_mat),
            ("theta_y", &self.theta_y),
            ("theta", &theta),
            ("Pi", &self.pi),
            ("A_xi", &self.a_xi),
            ("B_xi", &self.b_xi),
            ("C_xi", &self.c_xi),
            ("Gamma", &self.gamma),
            ("A_zeta", &self.a_zeta),
            ("B_zeta", &self.b_zeta),
            ("C_zeta", &self.c_zeta),
        ];
        let mut paths = Vec::new();
        for (name, m) in items {
            let path = dir.join(format!("{name}.csv"));
            m.write_csv(io::BufWriter::new(fs::File::create(&path)?))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Plant and augmented Riccati solutions and the gain relations between them.
#[derive(Clone, Debug)]
pub struct GainTransferReport<T> {
    pub p_star: SymMat<T>,
    pub k_star: Mat<T>,
    /// `K* Π`.
    pub k_star_pi: Mat<T>,
    /// Riccati residual of `Π' P* Π` in the filter coordinates, relative to `1 + ||Π' P* Π||`.
    pub xi_residual: T,
    pub p_zeta: SymMat<T>,
    pub k_zeta: Mat<T>,
    pub k_z: Mat<T>,
    /// `||K_z - K* Π|| / ||K* Π||`.
    pub k_z_rel_err: T,
    /// `K_z` recomputed with the alternative `Γ`.
    pub k_z_alt: Mat<T>,
    /// `||K_z - K_z_alt|| / ||K_z||`.
    pub gamma_invariance: T,
}

fn plant_gain<T: Real>(
    plant: &LtiPlant<T>,
    w: &WeightSpec<T>,
) -> Result<(SymMat<T>, Mat<T>), RealizationError> {
    let k0 = if is_hurwitz(plant.a()) {
        Mat::zeros(plant.m(), plant.n())
    } else {
        stabilizing_gain(plant.a(), plant.b())?
    };
    Ok(solve_care_kleinman(
        plant.a(),
        plant.b(),
        &w.state_weight(plant.c()),
        w.r(),
        &k0,
    )?)
}

fn zeta_gain<T: Real>(
    o: &OracleRealization<T>,
    w: &WeightSpec<T>,
    k_star_pi: &Mat<T>,
) -> Result<(SymMat<T>, Mat<T>), RealizationError> {
    let k0 = Mat::hstack(&[k_star_pi, &Mat::zeros(k_star_pi.rows(), o.n())]);
    let q = w.state_weight(&o.c_zeta);
    Ok(solve_care_kleinman(&o.a_zeta, &o.b_zeta, &q, w.r(), &k0)?)
}

/// Solves the plant and augmented Riccati equations independently and compares the gains,
/// repeating the augmented solve with `alt_gamma`.
pub fn verify_gain_transfer<T: Real>(
    oracle: &OracleRealization<T>,
    plant: &LtiPlant<T>,
    w: &WeightSpec<T>,
    alt_gamma: Mat<T>,
) -> Result<GainTransferReport<T>, RealizationError> {
    let (p_star, k_star) = plant_gain(plant, w)?;
    let k_star_pi = k_star.matmul(&oracle.pi);

    let p_xi = oracle.pi.tr_matmul(&p_star.to_mat()).matmul(&oracle.pi);
    let res = crate::matops::care_residual(
        &oracle.a_xi,
        &oracle.b_xi,
        &w.state_weight(&oracle.c_xi),
        w.r(),
        &SymMat::from_mat(&p_xi),
    )?;
    let xi_residual = res.norm_fro() / (T::one() + p_xi.norm_fro());

    let n_z = oracle.n_z();
    let (p_zeta, k_zeta) = zeta_gain(oracle, w, &k_star_pi)?;
    let k_z = k_zeta.block(0, 0, k_zeta.rows(), n_z);
    let k_z_rel_err = (&k_z - &k_star_pi).norm_fro() / k_star_pi.norm_fro();

    let alt = oracle.with_gamma(alt_gamma)?;
    let (_, k_zeta_alt) = zeta_gain(&alt, w, &k_star_pi)?;
    let k_z_alt = k_zeta_alt.block(0, 0, k_zeta_alt.rows(), n_z);
    let gamma_invariance = (&k_z - &k_z_alt).norm_fro() / k_z.norm_fro();

    Ok(GainTransferReport {
        p_star,
        k_star,
        k_star_pi,
        xi_residual,
        p_zeta,
        k_zeta,
        k_z,
        k_z_rel_err,
        k_z_alt,
        gamma_invariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (LtiPlant<f64>, FilterBank<f64>) {
        let plant = LtiPlant::f16(vec![0.6, -0.48, 0.64]).unwrap();
        let m = Mat::from_f64_rows(&[&[-1.0, 0.0, 0.0], &[1.0, -2.0, 0.0], &[0.0, 2.0, -3.0]]);
        (plant, FilterBank::build(3, 1, 1, m).unwrap())
    }

    #[test]
    fn scalar_sylvester_case() {
        let plant = LtiPlant::new(
            Mat::diag(&[-0.5]),
            Mat::diag(&[2.0]),
            Mat::diag(&[3.0]),
            vec![1.0],
        )
        .unwrap();
        let filter = FilterBank::build(1, 1, 1, Mat::diag(&[-2.0])).unwrap();
        let o = OracleRealization::construct(
            &plant,
            &filter,
            ThetaSource::Given(Mat::diag(&[1.5])),
            GammaChoice::Identity,
        )
        .unwrap();
        // T = Θ_y c / (a - μ)
        assert!((o.t_mat[(0, 0)] - 1.5 * 3.0 / 1.5_f64).abs() < 1e-14);
    }

    #[test]
    fn definition_identities_hold() {
        let (plant, filter) = setup();
        let ty = Mat::column_vector(&[6.6833, 8.9277, -36.593]);
        let o = OracleRealization::construct(
            &plant,
            &filter,
            ThetaSource::Given(ty),
            GammaChoice::MatchX0,
        )
        .unwrap();
        for r in o.definition_residuals(&plant) {
            assert!(r < 1e-8, "{r:e}");
        }
        assert!((&o.f() - filter.a_z()).max_abs() < 1e-12);
    }

    #[test]
    fn seeded_theta_is_deterministic() {
        let (plant, filter) = setup();
        let a = OracleRealization::construct(
            &plant,
            &filter,
            ThetaSource::Seeded(9),
            GammaChoice::Identity,
        )
        .unwrap();
        let b = OracleRealization::construct(
            &plant,
            &filter,
            ThetaSource::Seeded(9),
            GammaChoice::Identity,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matched_gamma_reproduces_initial_error() {
        // Γ 1_n = T x0 when z(0) = 0.
        let (plant, filter) = setup();
        let o = OracleRealization::construct(
            &plant,
            &filter,
            ThetaSource::Seeded(3),
            GammaChoice::MatchX0,
        )
        .unwrap();
        let lhs = o.gamma.matvec(&[1.0; 3]);
        let rhs = o.t_mat.matvec(plant.x0());
        for k in 0..3 {
            assert!((lhs[k] - rhs[k]).abs() < 1e-9 * rhs[k].abs().max(1.0));
        }
    }
}
