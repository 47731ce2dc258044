use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use ofvi_core::matops::{Mat, SymMat};
use ofvi_core::plant::{random_unit_vector, LtiPlant, ProbingSpec, WeightSpec};
use ofvi_core::realization::{FilterBank, ThetaSource};
use ofvi_core::vi::{DataViOptions, EscapeSets, Membership, RankPolicy, StepSchedule};
use serde::Deserialize;

use crate::CliError;

/// On-disk form: flat TOML, matrices as nested arrays of rows. Every key is optional
/// except that the plant must come from `preset` or from `a`, `b`, `c`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    a: Option<Vec<Vec<f64>>>,
    b: Option<Vec<Vec<f64>>>,
    c: Option<Vec<Vec<f64>>>,
    x0: Option<Vec<f64>>,
    x0_seed: Option<u64>,
    filter_m: Option<Vec<Vec<f64>>>,
    q: Option<Vec<Vec<f64>>>,
    r: Option<Vec<Vec<f64>>>,

    probing_seed: Option<u64>,
    probing_count: Option<usize>,
    probing_amp_base: Option<f64>,
    probing_amp_range: Option<[f64; 2]>,
    probing_freq_range: Option<[f64; 2]>,
    probing_phase_range: Option<[f64; 2]>,

    dt: Option<f64>,
    sample_interval: Option<f64>,
    horizon: Option<f64>,

    step_offset: Option<f64>,
    escape_scale: Option<f64>,
    escape_growth: Option<f64>,
    escape_membership: Option<String>,
    p0_scale: Option<f64>,
    delta: Option<f64>,
    max_iter: Option<usize>,
    rank_rtol: Option<f64>,
    rank_policy: Option<String>,
    min_rank: Option<usize>,
    project: Option<bool>,

    eval_horizon: Option<f64>,
    eval_x0: Option<Vec<f64>>,
    eval_x0_seed: Option<u64>,

    oracle_theta_y: Option<Vec<Vec<f64>>>,
    oracle_seed: Option<u64>,

    out: Option<PathBuf>,
}

/// Plant description. Kept unvalidated beyond shapes so that the learning path,
/// which never touches `A` or `C`, does not depend on them.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantSpec {
    pub a: Mat<f64>,
    pub b: Mat<f64>,
    pub c: Mat<f64>,
}

/// Validated experiment settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub x0: Vec<f64>,
    pub filter_m: Mat<f64>,
    pub q: SymMat<f64>,
    pub r: SymMat<f64>,
    pub probing_seed: u64,
    pub probing: ProbingSpec,
    pub dt: f64,
    pub sample_interval: f64,
    pub horizon: f64,
    pub schedule: StepSchedule,
    pub escape: EscapeSets<f64>,
    pub p0_scale: f64,
    pub delta: f64,
    pub max_iter: usize,
    pub rank_rtol: f64,
    pub rank_policy: RankPolicy,
    /// Smallest acceptable numerical rank under [`RankPolicy::MinNorm`].
    pub min_rank: usize,
    pub project: bool,
    pub eval_horizon: f64,
    pub eval_x0: Vec<f64>,
    pub oracle_theta: ThetaSource<f64>,
    pub out: PathBuf,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn matrix(name: &str, rows: Vec<Vec<f64>>) -> Result<Mat<f64>, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(bad(format!("`{name}` is empty")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(bad(format!("`{name}` has non-finite entries")));
    }
    Mat::from_rows(&rows).map_err(|e| bad(format!("`{name}`: {e}")))
}

fn symmetric(name: &str, rows: Vec<Vec<f64>>, dim: usize) -> Result<SymMat<f64>, CliError> {
    let m = matrix(name, rows)?;
    if m.shape() != (dim, dim) {
        return Err(bad(format!(
            "`{name}` must be {dim}x{dim}, got {:?}",
            m.shape()
        )));
    }
    if (&m - &m.transpose()).max_abs() > 1e-12 * (1.0 + m.max_abs()) {
        return Err(bad(format!("`{name}` is not symmetric")));
    }
    Ok(SymMat::from_mat(&m))
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64, CliError> {
    let v = v.unwrap_or(default);
    if v > 0.0 && !v.is_nan() {
        Ok(v)
    } else {
        Err(bad(format!("`{name}` must be positive, got {v}")))
    }
}

fn range(name: &str, v: Option<[f64; 2]>, default: [f64; 2]) -> Result<[f64; 2], CliError> {
    let v = v.unwrap_or(default);
    if v.iter().all(|x| x.is_finite()) && v[0] <= v[1] {
        Ok(v)
    } else {
        Err(bad(format!(
            "`{name}` must be a finite [lo, hi] with lo <= hi"
        )))
    }
}

fn f16_matrices() -> PlantSpec {
    let p = LtiPlant::<f64>::f16(vec![0.0; 3]).expect("preset is controllable and observable");
    PlantSpec {
        a: p.a().clone(),
        b: p.b().clone(),
        c: p.c().clone(),
    }
}

/// Lower bidiagonal with diagonal `-1, -2, ..` and sub-diagonal `1, 2, ..`.
pub fn default_filter(n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            -((i + 1) as f64)
        } else if i == j + 1 {
            j as f64 + 1.0
        } else {
            0.0
        }
    })
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        Self::validate(raw)
    }

    fn validate(raw: RawConfig) -> Result<Self, CliError> {
        let plant = match (raw.preset.as_deref(), raw.a, raw.b, raw.c) {
            (Some("f16"), None, None, None) => f16_matrices(),
            (Some(other), None, None, None) => {
                return Err(bad(format!("unknown preset `{other}`")))
            }
            (None, Some(a), Some(b), Some(c)) => PlantSpec {
                a: matrix("a", a)?,
                b: matrix("b", b)?,
                c: matrix("c", c)?,
            },
            (Some(_), ..) => return Err(bad("give either `preset` or `a`, `b`, `c`, not both")),
            _ => return Err(bad("plant needs `preset` or all of `a`, `b`, `c`")),
        };
        let n = plant.a.rows();
        let (m, p) = (plant.b.cols(), plant.c.rows());
        if !plant.a.is_square() || plant.b.rows() != n || plant.c.cols() != n {
            return Err(bad(format!(
                "inconsistent plant shapes: A {:?}, B {:?}, C {:?}",
                plant.a.shape(),
                plant.b.shape(),
                plant.c.shape()
            )));
        }

        let x0 = match (raw.x0, raw.x0_seed) {
            (Some(_), Some(_)) => return Err(bad("give `x0` or `x0_seed`, not both")),
            (Some(x), None) => x,
            (None, seed) => random_unit_vector(seed.unwrap_or(0), n),
        };
        let eval_x0 = match (raw.eval_x0, raw.eval_x0_seed) {
            (Some(_), Some(_)) => return Err(bad("give `eval_x0` or `eval_x0_seed`, not both")),
            (Some(x), None) => x,
            (None, seed) => random_unit_vector(seed.unwrap_or(1), n),
        };
        for (name, v) in [("x0", &x0), ("eval_x0", &eval_x0)] {
            if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                return Err(bad(format!("`{name}` must hold {n} finite entries")));
            }
        }

        let filter_m = match raw.filter_m {
            Some(rows) => matrix("filter_m", rows)?,
            None => default_filter(n),
        };
        FilterBank::build(n, m, p, filter_m.clone())
            .map_err(|e| bad(format!("`filter_m`: {e}")))?;

        let q = match raw.q {
            Some(rows) => symmetric("q", rows, p)?,
            None => SymMat::identity(p),
        };
        let r = match raw.r {
            Some(rows) => symmetric("r", rows, m)?,
            None => SymMat::identity(m),
        };
        WeightSpec::new(q.clone(), r.clone()).map_err(|e| bad(e.to_string()))?;

        let defaults = ProbingSpec::default();
        let probing = ProbingSpec {
            count: raw.probing_count.unwrap_or(defaults.count),
            amp_base: raw.probing_amp_base.unwrap_or(defaults.amp_base),
            amp_range: range(
                "probing_amp_range",
                raw.probing_amp_range,
                defaults.amp_range,
            )?,
            freq_range: range(
                "probing_freq_range",
                raw.probing_freq_range,
                defaults.freq_range,
            )?,
            phase_range: range("probing_phase_range", raw.probing_phase_range, [0.0, TAU])?,
        };
        if !probing.amp_base.is_finite() {
            return Err(bad("`probing_amp_base` must be finite"));
        }

        let dt = positive("dt", raw.dt, 1e-4)?;
        let sample_interval = positive("sample_interval", raw.sample_interval, 0.01)?;
        let horizon = positive("horizon", raw.horizon, 5.0)?;
        let ratio = sample_interval / dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio || ratio.round() < 1.0 {
            return Err(bad("`sample_interval` must be a whole multiple of `dt`"));
        }

        let offset = positive("step_offset", raw.step_offset, 1.0)?;
        let membership = match raw.escape_membership.as_deref() {
            None | Some("psd") => Membership::PsdBall,
            Some("norm") => Membership::NormBall,
            Some(other) => {
                return Err(bad(format!(
                    "`escape_membership` must be \"psd\" or \"norm\", got `{other}`"
                )))
            }
        };
        let escape = EscapeSets {
            scale: positive("escape_scale", raw.escape_scale, 5.0)?,
            growth: raw.escape_growth.unwrap_or(2.0),
            membership,
        };
        if !(escape.growth > 1.0 && escape.growth.is_finite()) {
            return Err(bad("`escape_growth` must be finite and > 1"));
        }
        let delta = raw.delta.unwrap_or(1e-4);
        if delta.is_nan() || delta <= 0.0 {
            return Err(bad("`delta` must be positive (inf allowed)"));
        }
        let rank_policy = match raw.rank_policy.as_deref() {
            None | Some("strict") => RankPolicy::Strict,
            Some("min-norm") => RankPolicy::MinNorm,
            Some(other) => {
                return Err(bad(format!(
                    "`rank_policy` must be \"strict\" or \"min-norm\", got `{other}`"
                )))
            }
        };
        let rank_rtol = positive("rank_rtol", raw.rank_rtol, 1e-8)?;

        let oracle_theta = match (raw.oracle_theta_y, raw.oracle_seed) {
            (Some(_), Some(_)) => {
                return Err(bad("give `oracle_theta_y` or `oracle_seed`, not both"))
            }
            (Some(rows), None) => {
                let ty = matrix("oracle_theta_y", rows)?;
                if ty.shape() != (n, p) {
                    return Err(bad(format!("`oracle_theta_y` must be {n}x{p}")));
                }
                ThetaSource::Given(ty)
            }
            (None, seed) => ThetaSource::Seeded(seed.unwrap_or(0)),
        };

        Ok(Self {
            plant,
            x0,
            filter_m,
            q,
            r,
            probing_seed: raw.probing_seed.unwrap_or(7),
            probing,
            dt,
            sample_interval,
            horizon,
            schedule: StepSchedule::Harmonic { offset },
            escape,
            p0_scale: positive("p0_scale", raw.p0_scale, 1.0)?,
            delta,
            max_iter: raw.max_iter.unwrap_or(200_000),
            rank_rtol,
            rank_policy,
            min_rank: raw.min_rank.unwrap_or(1),
            project: raw.project.unwrap_or(false),
            eval_horizon: positive("eval_horizon", raw.eval_horizon, 28.0)?,
            eval_x0,
            oracle_theta,
            out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    pub fn n(&self) -> usize {
        self.plant.a.rows()
    }

    pub fn m(&self) -> usize {
        self.plant.b.cols()
    }

    pub fn p(&self) -> usize {
        self.plant.c.rows()
    }

    /// Validated plant started at the collection `x0`.
    pub fn build_plant(&self) -> Result<LtiPlant<f64>, CliError> {
        LtiPlant::new(
            self.plant.a.clone(),
            self.plant.b.clone(),
            self.plant.c.clone(),
            self.x0.clone(),
        )
        .map_err(|e| bad(format!("plant: {e}")))
    }

    pub fn filter(&self) -> FilterBank<f64> {
        FilterBank::build(self.n(), self.m(), self.p(), self.filter_m.clone())
            .expect("checked in validate")
    }

    pub fn weights(&self) -> WeightSpec<f64> {
        WeightSpec::new(self.q.clone(), self.r.clone()).expect("checked in validate")
    }

    pub fn data_vi_options(&self) -> DataViOptions<f64> {
        DataViOptions {
            schedule: self.schedule,
            escape: self.escape,
            delta: self.delta,
            max_iter: self.max_iter,
            project: self.project,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_defaults() {
        let c = ExperimentConfig::from_toml("preset = \"f16\"").unwrap();
        assert_eq!((c.n(), c.m(), c.p()), (3, 1, 1));
        assert_eq!(c.filter_m, default_filter(3));
        assert_eq!(c.filter_m[(2, 1)], 2.0);
        assert_eq!(c.probing.count, 100);
        assert_eq!(c.max_iter, 200_000);
        assert_eq!(c.rank_policy, RankPolicy::Strict);
        assert!((c.x0.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(c.x0, c.eval_x0);
    }

    #[test]
    fn unknown_key_rejected() {
        let e = ExperimentConfig::from_toml("preset = \"f16\"\nhorizn = 5.0").unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
    }

    #[test]
    fn explicit_plant_and_shapes() {
        let ok = "a = [[0.0, 1.0], [-1.0, -1.0]]\nb = [[0.0], [1.0]]\nc = [[1.0, 0.0]]";
        let c = ExperimentConfig::from_toml(ok).unwrap();
        assert_eq!(c.n(), 2);
        assert!(c.build_plant().is_ok());
        let bad_shape = "a = [[0.0, 1.0], [-1.0, -1.0]]\nb = [[0.0]]\nc = [[1.0, 0.0]]";
        assert!(ExperimentConfig::from_toml(bad_shape).is_err());
        assert!(ExperimentConfig::from_toml("preset = \"f16\"\na = [[1.0]]").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for extra in [
            "dt = -1.0",
            "dt = 3e-3",
            "filter_m = [[-1.0, 1.0, 0.0], [1.0, -2.0, 0.0], [0.0, 2.0, -3.0]]",
            "filter_m = [[-1.0, 0.0, 0.0], [1.0, -1.0, 0.0], [0.0, 2.0, -3.0]]",
            "q = [[-1.0]]",
            "r = [[1.0, 0.0], [0.0, 1.0]]",
            "escape_membership = \"box\"",
            "rank_policy = \"loose\"",
            "delta = 0.0",
            "x0 = [1.0, 0.0]",
            "x0 = [1.0, 0.0, 0.0]\nx0_seed = 3",
        ] {
            let text = format!("preset = \"f16\"\n{extra}");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{extra}");
        }
    }

    #[test]
    fn infinite_delta_parses() {
        let c = ExperimentConfig::from_toml("preset = \"f16\"\ndelta = inf").unwrap();
        assert!(c.delta.is_infinite());
    }

    #[test]
    fn shipped_f16_config_is_valid() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/f16.cfg");
        let c = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(c.x0.len(), 3);
        assert!(matches!(c.oracle_theta, ThetaSource::Given(_)));
        assert_eq!(c.rank_policy, RankPolicy::MinNorm);
        assert_eq!(c.max_iter, 2000);
    }
}
