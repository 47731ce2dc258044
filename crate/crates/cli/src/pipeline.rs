use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ofvi_core::matops::{hurwitz_certificate, norm2, Mat, SymMat};
use ofvi_core::plant::{
    eval_cost, make_probing, simulate, CoupledOde, LtiPlant, Sample, TrajectoryLog,
};
use ofvi_core::realization::{
    step_coupled, verify_gain_transfer, GainTransferReport, GammaChoice, NoAccumulator,
    OracleRealization,
};
use ofvi_core::vi::{
    collect, data_vi, extract_controller, rank_check, write_history_csv, OSolver, RankPolicy,
    RankReport, RegressionData, StopReason, ViOracle, ViOutcome,
};
use serde::Serialize;

use crate::report::rows;
use crate::{CliError, ClosedLoopController, ExperimentConfig, RunReport};

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const REGRESSION_CSV: &str = "regression.csv";
pub const GAINS_CSV: &str = "gains.csv";
pub const K_Z_CSV: &str = "k_z.csv";
pub const P_HAT_CSV: &str = "p_hat.csv";
pub const HISTORY_CSV: &str = "history.csv";
pub const CLOSED_LOOP_CSV: &str = "closed_loop.csv";

/// Tracking error is measured from this time on (or from the end of shorter runs).
const TRACK_FROM: f64 = 10.0;

fn create<P: AsRef<Path>>(path: P) -> Result<BufWriter<File>, CliError> {
    let path = path.as_ref();
    File::create(path)
        .map(BufWriter::new)
        .map_err(CliError::io(path))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_mat(dir: &Path, name: &str, m: &Mat<f64>) -> Result<String, CliError> {
    let path = dir.join(name);
    m.write_csv(create(&path)?).map_err(CliError::io(&path))?;
    Ok(name.to_string())
}

fn read_mat(dir: &Path, name: &str) -> Result<Mat<f64>, CliError> {
    let path = dir.join(name);
    let f = File::open(&path).map_err(CliError::io(&path))?;
    Ok(Mat::read_csv(BufReader::new(f))?)
}

/// Smallest rank the configured policy accepts.
fn min_rank(cfg: &ExperimentConfig, needed: usize) -> usize {
    match cfg.rank_policy {
        RankPolicy::Strict => needed,
        RankPolicy::MinNorm => cfg.min_rank.max(1),
    }
}

/// Rows must cover the unknowns under either policy; the rank bound depends on the policy.
fn rank_verdict(cfg: &ExperimentConfig, r: &RankReport) -> Result<(), CliError> {
    let min = min_rank(cfg, r.needed);
    if r.rows < r.needed || r.rank < min {
        return Err(CliError::Rank {
            rank: r.rank,
            needed: r.needed,
            rows: r.rows,
            min,
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct CollectSummary {
    pub rank: RankReport,
    pub rank_ok: bool,
    pub min_rank: usize,
    pub files: Vec<String>,
}

/// Runs the probing experiment and writes the trajectory and regression CSVs.
/// A failed rank condition is reported in the summary, not as an error.
pub fn collect_stage(cfg: &ExperimentConfig) -> Result<CollectSummary, CliError> {
    let plant = cfg.build_plant()?;
    let filter = cfg.filter();
    let probe = make_probing::<f64>(cfg.probing_seed, &cfg.probing, cfg.m());
    let law = move |t: f64, _zeta: &[f64], u: &mut [f64]| probe.eval_into(t, u);
    let c = collect(
        &plant,
        &filter,
        law,
        cfg.dt,
        cfg.sample_interval,
        cfg.horizon,
    )?;

    ensure_dir(&cfg.out)?;
    let traj = cfg.out.join(TRAJECTORY_CSV);
    c.log
        .write_csv(create(&traj)?)
        .map_err(CliError::io(&traj))?;
    let reg = cfg.out.join(REGRESSION_CSV);
    let mut w = create(&reg)?;
    c.data
        .write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(CliError::io(&reg))?;

    let rank = rank_check(&c.data, cfg.rank_rtol)?;
    Ok(CollectSummary {
        rank_ok: rank_verdict(cfg, &rank).is_ok(),
        min_rank: min_rank(cfg, rank.needed),
        rank,
        files: vec![TRAJECTORY_CSV.into(), REGRESSION_CSV.into()],
    })
}

fn print_rank(s: &CollectSummary) {
    let r = &s.rank;
    println!(
        "rank {} of {} unknowns from {} rows (accepting >= {}), sigma_max {:.3e}, smallest kept {:.3e}: {}",
        r.rank,
        r.needed,
        r.rows,
        s.min_rank,
        r.sigma_max,
        r.smallest_kept,
        if s.rank_ok { "ok" } else { "FAILED" }
    );
}

pub fn cmd_collect(cfg: &ExperimentConfig) -> Result<CollectSummary, CliError> {
    let s = collect_stage(cfg)?;
    print_rank(&s);
    if !s.rank_ok {
        rank_verdict(cfg, &s.rank)?;
    }
    Ok(s)
}

/// Model-based reference: realization, plant and augmented Riccati solutions.
#[derive(Clone, Debug)]
pub struct OracleBundle {
    pub plant: LtiPlant<f64>,
    pub realization: OracleRealization<f64>,
    pub transfer: GainTransferReport<f64>,
}

pub fn oracle_bundle(cfg: &ExperimentConfig) -> Result<OracleBundle, CliError> {
    let plant = cfg.build_plant()?;
    let filter = cfg.filter();
    let realization = OracleRealization::construct(
        &plant,
        &filter,
        cfg.oracle_theta.clone(),
        GammaChoice::MatchX0,
    )?;
    let transfer =
        verify_gain_transfer(&realization, &plant, &cfg.weights(), Mat::identity(cfg.n()))?;
    Ok(OracleBundle {
        plant,
        realization,
        transfer,
    })
}

#[derive(Serialize)]
struct OracleJson {
    theta_y: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
    k_star: Vec<Vec<f64>>,
    p_star: Vec<Vec<f64>>,
    k_star_pi: Vec<Vec<f64>>,
    definition_residuals: [f64; 3],
    xi_riccati_residual: f64,
    k_z_rel_err: f64,
    gamma_invariance: f64,
}

/// Dumps the reference realization and gains into `out/oracle`.
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<OracleBundle, CliError> {
    let b = oracle_bundle(cfg)?;
    let dir = cfg.out.join("oracle");
    b.realization.dump_csv(&dir).map_err(CliError::io(&dir))?;
    let t = &b.transfer;
    write_mat(&dir, "K_star.csv", &t.k_star)?;
    write_mat(&dir, "P_star.csv", &t.p_star.to_mat())?;
    write_mat(&dir, "K_star_Pi.csv", &t.k_star_pi)?;
    write_mat(&dir, "K_zeta_star.csv", &t.k_zeta)?;
    write_mat(&dir, "P_zeta_star.csv", &t.p_zeta.to_mat())?;
    let residuals = b.realization.definition_residuals(&b.plant);
    let json = OracleJson {
        theta_y: rows(&b.realization.theta_y),
        t: rows(&b.realization.t_mat),
        k_star: rows(&t.k_star),
        p_star: rows(&t.p_star.to_mat()),
        k_star_pi: rows(&t.k_star_pi),
        definition_residuals: residuals,
        xi_riccati_residual: t.xi_residual,
        k_z_rel_err: t.k_z_rel_err,
        gamma_invariance: t.gamma_invariance,
    };
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&json).expect("plain data") + "\n";
    fs::write(&path, text).map_err(CliError::io(&path))?;
    println!("K* = {:?}", t.k_star.row(0));
    println!(
        "definition residuals {:.2e} {:.2e} {:.2e}; |K_z* - K*Pi|/|K*Pi| = {:.2e}; gamma invariance {:.2e}",
        residuals[0], residuals[1], residuals[2], t.k_z_rel_err, t.gamma_invariance
    );
    Ok(b)
}

#[derive(Clone, Debug)]
pub struct LearnSummary {
    pub outcome: ViOutcome<f64>,
    pub k_z: Mat<f64>,
    pub k_eps: Mat<f64>,
    pub rank: RankReport,
    pub files: Vec<String>,
}

impl LearnSummary {
    pub fn converged(&self) -> bool {
        self.outcome.stop == StopReason::Converged
    }
}

/// Learns from `out/regression.csv` alone. Plant matrices, `x0` and the plant state are
/// read only when `attach_oracle` asks for reference errors.
pub fn learn_stage(cfg: &ExperimentConfig, attach_oracle: bool) -> Result<LearnSummary, CliError> {
    let path = cfg.out.join(REGRESSION_CSV);
    let f = File::open(&path).map_err(CliError::io(&path))?;
    let data = RegressionData::<f64>::read_csv(BufReader::new(f))?;
    let filter = cfg.filter();
    if (data.n_zeta, data.m, data.p) != (filter.n_zeta(), cfg.m(), cfg.p()) {
        return Err(CliError::Config(format!(
            "regression data has (n_zeta, m, p) = ({}, {}, {}) but the config implies ({}, {}, {})",
            data.n_zeta,
            data.m,
            data.p,
            filter.n_zeta(),
            cfg.m(),
            cfg.p()
        )));
    }
    let b_zeta = filter.b_zeta();
    let solver = OSolver::new(&data, &cfg.q, &b_zeta, cfg.rank_rtol, cfg.rank_policy)?;
    let rank = solver.rank_report().clone();
    rank_verdict(cfg, &rank)?;

    let bundle = if attach_oracle {
        Some(oracle_bundle(cfg)?)
    } else {
        None
    };
    let oracle = bundle.as_ref().map(|b| ViOracle {
        p_star: &b.transfer.p_zeta,
        k_star: &b.transfer.k_zeta,
    });
    let p0 = SymMat::scaled_identity(filter.n_zeta(), cfg.p0_scale);
    let outcome = data_vi(
        &solver,
        &cfg.r,
        &b_zeta,
        &p0,
        &cfg.data_vi_options(),
        oracle,
    )?;
    let (k_z, k_eps) = extract_controller(&outcome.k, filter.n_z())?;

    let dir = &cfg.out;
    let mut files = vec![
        write_mat(dir, GAINS_CSV, &outcome.k)?,
        write_mat(dir, K_Z_CSV, &k_z)?,
        write_mat(dir, P_HAT_CSV, &outcome.p.to_mat())?,
    ];
    let hist = dir.join(HISTORY_CSV);
    write_history_csv(&outcome.history, create(&hist)?).map_err(CliError::io(&hist))?;
    files.push(HISTORY_CSV.into());
    Ok(LearnSummary {
        outcome,
        k_z,
        k_eps,
        rank,
        files,
    })
}

pub fn cmd_learn(cfg: &ExperimentConfig, attach_oracle: bool) -> Result<LearnSummary, CliError> {
    let s = learn_stage(cfg, attach_oracle)?;
    let o = &s.outcome;
    println!(
        "{} after {} iterations ({} resets, escape index {})",
        if s.converged() {
            "converged"
        } else {
            "iteration cap reached"
        },
        o.iterations,
        o.resets,
        o.j
    );
    if let Some(h) = o.history.last() {
        if let (Some(ep), Some(ek)) = (h.err_p, h.err_k) {
            println!("relative error vs reference: P {ep:.4e}, K {ek:.4e}");
        }
    }
    println!("K_z = {:?}", s.k_z.as_slice());
    Ok(s)
}

/// Sampled learned and reference closed loops on a common time grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClosedLoopTrace {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub z_norm: Vec<f64>,
    pub u_learned: Vec<Vec<f64>>,
    pub u_optimal: Vec<Vec<f64>>,
    pub y_learned: Vec<Vec<f64>>,
    pub y_optimal: Vec<Vec<f64>>,
    /// `||x - Pi vec(Z)||`.
    pub x_pi_z: Vec<f64>,
}

impl ClosedLoopTrace {
    /// Header `t,x_..,log10_z_fro,u_learned_..,u_optimal_..,y_learned_..,y_optimal_..,x_pi_z`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (n, m, p) = (
            self.x[0].len(),
            self.u_learned[0].len(),
            self.y_learned[0].len(),
        );
        let mut h = vec!["t".to_string()];
        h.extend((1..=n).map(|i| format!("x_{i}")));
        h.push("log10_z_fro".into());
        h.extend((1..=m).map(|i| format!("u_learned_{i}")));
        h.extend((1..=m).map(|i| format!("u_optimal_{i}")));
        h.extend((1..=p).map(|i| format!("y_learned_{i}")));
        h.extend((1..=p).map(|i| format!("y_optimal_{i}")));
        h.push("x_pi_z".into());
        writeln!(w, "{}", h.join(","))?;
        for k in 0..self.t.len() {
            write!(w, "{:.16e}", self.t[k])?;
            let cells = self.x[k]
                .iter()
                .copied()
                .chain([self.z_norm[k].log10()])
                .chain(self.u_learned[k].iter().copied())
                .chain(self.u_optimal[k].iter().copied())
                .chain(self.y_learned[k].iter().copied())
                .chain(self.y_optimal[k].iter().copied())
                .chain([self.x_pi_z[k]]);
            for v in cells {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Lyapunov-Cholesky certificate of `A_xi - B_xi K_z` succeeded.
    pub hurwitz: bool,
    /// `||x(end)|| / ||x(0)||`.
    pub x_ratio: f64,
    /// `||Z(end)||_F / max_t ||Z(t)||_F`.
    pub z_ratio: f64,
    /// `max_{t >= 10} |u_learned - u_optimal| / max_t |u_optimal|`.
    pub u_tracking: f64,
    pub x_pi_z_final: f64,
    /// Least-squares decay rate of `log ||x - Pi vec(Z)||`.
    pub x_pi_z_rate: f64,
    pub cost_learned: f64,
    pub cost_optimal: f64,
    pub files: Vec<String>,
}

impl EvalReport {
    pub fn stable(&self) -> bool {
        self.hurwitz && self.x_ratio.is_finite() && self.x_ratio < 1.0
    }
}

fn max_abs(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Slope of the least-squares line through `(t, -ln e)` over samples above `1e-10 max e`.
fn decay_rate(t: &[f64], e: &[f64]) -> f64 {
    let top = e.iter().copied().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(e)
        .filter(|(_, &v)| v > 1e-10 * top && v > 0.0)
        .map(|(&t, &v)| (t, -v.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let (mt, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + t / k, b + y / k));
    let (num, den) = pts.iter().fold((0.0, 0.0), |(n, d), (t, y)| {
        (n + (t - mt) * (y - my), d + (t - mt) * (t - mt))
    });
    num / den
}

/// Runs the plant from `eval_x0` under `u = -K_z vec(Z)` and, alongside, under the reference
/// state feedback `u = -K* x`, for `eval_horizon` seconds.
pub fn evaluate_gain(
    cfg: &ExperimentConfig,
    bundle: &OracleBundle,
    k_z: &Mat<f64>,
) -> Result<(EvalReport, ClosedLoopTrace), CliError> {
    let filter = cfg.filter();
    let plant = bundle.plant.with_x0(cfg.eval_x0.clone())?;
    let real = &bundle.realization;
    let controller = ClosedLoopController::new(&filter, k_z.clone())?;
    let a_cl = &real.a_xi - &real.b_xi.matmul(k_z);
    let hurwitz = hurwitz_certificate(&a_cl).is_ok();

    let mut tr = ClosedLoopTrace::default();
    let mut ode = step_coupled(&plant, &filter, controller, NoAccumulator, cfg.dt)?;
    let run = simulate(&mut ode, cfg.sample_interval, cfg.eval_horizon, |o| {
        let t = o.t();
        let (sys, state) = o.parts_mut();
        let layout = sys.layout().clone();
        let s = sys.observe(t, state);
        let x = state[layout.x()].to_vec();
        let z = &state[layout.z()];
        let pz = real.pi.matvec(z);
        let gap: Vec<f64> = x.iter().zip(&pz).map(|(a, b)| a - b).collect();
        tr.t.push(t);
        tr.z_norm.push(norm2(z));
        tr.x_pi_z.push(norm2(&gap));
        tr.x.push(x);
        tr.u_learned.push(s.u);
        tr.y_learned.push(s.y);
    });
    if let Err(e) = run {
        return Err(CliError::Unstable(format!("learned closed loop: {e}")));
    }

    let k_star = &bundle.transfer.k_star;
    let a_opt = plant.a() - &plant.b().matmul(k_star);
    let rhs = |_t: f64, x: &[f64], dx: &mut [f64]| dx.copy_from_slice(&a_opt.matvec(x));
    let mut opt = CoupledOde::new(rhs, cfg.eval_x0.clone(), 0.0, cfg.dt)?;
    simulate(&mut opt, cfg.sample_interval, cfg.eval_horizon, |o| {
        let x = o.state();
        tr.u_optimal
            .push(k_star.matvec(x).iter().map(|v| -v).collect());
        tr.y_optimal.push(plant.output(x));
    })?;

    let last = tr.t.len() - 1;
    let x_ratio = norm2(&tr.x[last]) / norm2(&tr.x[0]);
    let z_max = tr.z_norm.iter().copied().fold(0.0, f64::max);
    let from = TRACK_FROM.min(tr.t[last]);
    let dev = (0..tr.t.len())
        .filter(|&k| tr.t[k] >= from - 1e-9)
        .flat_map(|k| {
            tr.u_learned[k]
                .iter()
                .zip(&tr.u_optimal[k])
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    let log = |u: &[Vec<f64>], y: &[Vec<f64>]| TrajectoryLog {
        samples: (0..tr.t.len())
            .map(|k| Sample {
                t: tr.t[k],
                u: u[k].clone(),
                y: y[k].clone(),
                zeta: Vec::new(),
            })
            .collect(),
    };
    let w = cfg.weights();
    let report = EvalReport {
        hurwitz,
        x_ratio,
        z_ratio: tr.z_norm[last] / z_max,
        u_tracking: dev / max_abs(&tr.u_optimal),
        x_pi_z_final: tr.x_pi_z[last],
        x_pi_z_rate: decay_rate(&tr.t, &tr.x_pi_z),
        cost_learned: eval_cost(&log(&tr.u_learned, &tr.y_learned), &w, cfg.eval_horizon),
        cost_optimal: eval_cost(&log(&tr.u_optimal, &tr.y_optimal), &w, cfg.eval_horizon),
        files: Vec::new(),
    };
    Ok((report, tr))
}

/// Evaluates `out/k_z.csv` and writes `closed_loop.csv`; an unstable loop is an error
/// after the trace has been written.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<EvalReport, CliError> {
    let k_z = read_mat(&cfg.out, K_Z_CSV)?;
    let bundle = oracle_bundle(cfg)?;
    let (mut report, trace) = evaluate_gain(cfg, &bundle, &k_z)?;
    let path = cfg.out.join(CLOSED_LOOP_CSV);
    trace
        .write_csv(create(&path)?)
        .map_err(CliError::io(&path))?;
    report.files.push(CLOSED_LOOP_CSV.into());
    println!(
        "Hurwitz certificate {}; |x(T)|/|x(0)| = {:.3e}; |Z(T)|/max|Z| = {:.3e}; u tracking {:.3e}; cost {:.6e} vs optimal {:.6e}",
        if report.hurwitz { "ok" } else { "FAILED" },
        report.x_ratio,
        report.z_ratio,
        report.u_tracking,
        report.cost_learned,
        report.cost_optimal
    );
    if !report.stable() {
        return Err(CliError::Unstable(format!(
            "certificate {}, |x(T)|/|x(0)| = {:.3e}",
            report.hurwitz, report.x_ratio
        )));
    }
    Ok(report)
}

/// Collect, learn and evaluate, then write `report.json`. A failed rank condition
/// stops the run before learning, with the report still written.
pub fn cmd_full(cfg: &ExperimentConfig, attach_oracle: bool) -> Result<RunReport, CliError> {
    let c = collect_stage(cfg)?;
    print_rank(&c);
    let mut report = RunReport::new(&c);
    if !c.rank_ok {
        report.write(&cfg.out)?;
        rank_verdict(cfg, &c.rank)?;
    }
    let l = cmd_learn(cfg, attach_oracle)?;
    report.add_learn(&l);
    let outcome = cmd_evaluate(cfg);
    if let Ok(e) = &outcome {
        report.add_eval(e);
    }
    report.write(&cfg.out)?;
    outcome.map(|_| report)
}
