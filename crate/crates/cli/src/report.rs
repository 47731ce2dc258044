use std::fs;
use std::path::Path;

use ofvi_core::matops::Mat;
use serde::Serialize;

use crate::pipeline::{CollectSummary, EvalReport, LearnSummary};
use crate::CliError;

pub(crate) fn rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RankStatus {
    pub ok: bool,
    pub rank: usize,
    pub needed: usize,
    pub min_accepted: usize,
    pub rows: usize,
    pub sigma_max: f64,
    pub smallest_kept: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LearnStatus {
    pub iterations: usize,
    pub resets: usize,
    pub escape_index: usize,
    pub converged: bool,
    pub k_zeta: Vec<Vec<f64>>,
    pub k_z: Vec<Vec<f64>>,
    /// Final relative errors against the model-based solution, when attached.
    pub err_p: Option<f64>,
    pub err_k: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedLoopStatus {
    pub hurwitz: bool,
    pub x_ratio: f64,
    pub z_ratio: f64,
    pub u_tracking: f64,
    pub x_pi_z_final: f64,
    pub x_pi_z_rate: f64,
    pub cost_learned: f64,
    pub cost_optimal: f64,
}

/// Summary of a `full` run. Every number is also recoverable from the listed CSVs.
/// Contains no timings, so identical configs give identical reports.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub rank: RankStatus,
    pub learn: Option<LearnStatus>,
    pub closed_loop: Option<ClosedLoopStatus>,
    /// File names relative to the output directory.
    pub manifest: Vec<String>,
}

impl RunReport {
    pub fn new(collect: &CollectSummary) -> Self {
        let r = &collect.rank;
        Self {
            rank: RankStatus {
                ok: collect.rank_ok,
                rank: r.rank,
                needed: r.needed,
                min_accepted: collect.min_rank,
                rows: r.rows,
                sigma_max: r.sigma_max,
                smallest_kept: r.smallest_kept,
            },
            learn: None,
            closed_loop: None,
            manifest: collect.files.clone(),
        }
    }

    pub fn add_learn(&mut self, l: &LearnSummary) {
        let last = l.outcome.history.last();
        self.learn = Some(LearnStatus {
            iterations: l.outcome.iterations,
            resets: l.outcome.resets,
            escape_index: l.outcome.j,
            converged: l.converged(),
            k_zeta: rows(&l.outcome.k),
            k_z: rows(&l.k_z),
            err_p: last.and_then(|h| h.err_p),
            err_k: last.and_then(|h| h.err_k),
        });
        self.manifest.extend(l.files.iter().cloned());
    }

    pub fn add_eval(&mut self, e: &EvalReport) {
        self.closed_loop = Some(ClosedLoopStatus {
            hurwitz: e.hurwitz,
            x_ratio: e.x_ratio,
            z_ratio: e.z_ratio,
            u_tracking: e.u_tracking,
            x_pi_z_final: e.x_pi_z_final,
            x_pi_z_rate: e.x_pi_z_rate,
            cost_learned: e.cost_learned,
            cost_optimal: e.cost_optimal,
        });
        self.manifest.extend(e.files.iter().cloned());
    }

    /// Writes `report.json` into `dir` and lists it in the manifest.
    pub fn write(&mut self, dir: &Path) -> Result<(), CliError> {
        self.manifest.push("report.json".into());
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).expect("report is plain data");
        fs::write(&path, text + "\n").map_err(CliError::io(&path))
    }
}
