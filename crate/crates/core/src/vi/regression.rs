use std::io::{self, BufRead, Write};

use crate::matops::{half_len, Mat, SymMat};
use crate::plant::{simulate, LtiPlant, TrajectoryLog};
use crate::realization::{step_coupled, FilterBank, InputLaw};
use crate::vi::ViError;
use crate::Real;

/// Co-integrated running integrals of `zeta ⊗ zeta` (unique products, lower
/// triangle column by column), `zeta ⊗ u` and `y ⊗ y`.
#[derive(Clone, Debug)]
pub struct RegressionAccumulator {
    n_zeta: usize,
    m: usize,
    p: usize,
}

impl RegressionAccumulator {
    pub fn new(n_zeta: usize, m: usize, p: usize) -> Self {
        Self { n_zeta, m, p }
    }

    pub fn zz_len(&self) -> usize {
        half_len(self.n_zeta)
    }

    pub fn zu_len(&self) -> usize {
        self.n_zeta * self.m
    }

    pub fn yy_len(&self) -> usize {
        self.p * self.p
    }
}

/// Unique products `zeta_i zeta_j`, `i >= j`, in half-vector order.
fn unique_products<T: Real>(zeta: &[T], out: &mut [T]) {
    let mut k = 0;
    for j in 0..zeta.len() {
        for i in j..zeta.len() {
            out[k] = zeta[i] * zeta[j];
            k += 1;
        }
    }
}

impl<T: Real> crate::realization::CoIntegrated<T> for RegressionAccumulator {
    fn len(&self) -> usize {
        self.zz_len() + self.zu_len() + self.yy_len()
    }

    fn derivative(&mut self, zeta: &[T], u: &[T], y: &[T], out: &mut [T]) {
        let (zz, rest) = out.split_at_mut(self.zz_len());
        let (zu, yy) = rest.split_at_mut(self.zu_len());
        unique_products(zeta, zz);
        for (i, &zi) in zeta.iter().enumerate() {
            for (k, &uk) in u.iter().enumerate() {
                zu[i * self.m + k] = zi * uk;
            }
        }
        for (i, &yi) in y.iter().enumerate() {
            for (j, &yj) in y.iter().enumerate() {
                yy[i * self.p + j] = yi * yj;
            }
        }
    }
}

/// Per-interval integrals over a partition `t_0 < t_1 < ... < t_l`.
///
/// `i_zz` and `d_zz` hold unique products only (one column per lower-triangle
/// entry); [`RegressionData::i_zz_full`] expands to all `n_zeta^2` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionData<T> {
    pub n_zeta: usize,
    pub m: usize,
    pub p: usize,
    pub partition: Vec<T>,
    pub i_zz: Mat<T>,
    pub i_zu: Mat<T>,
    pub i_yy: Mat<T>,
    pub d_zz: Mat<T>,
}

fn expand_full<T: Real>(half: &Mat<T>, n: usize) -> Mat<T> {
    let s = SymMat::<T>::zeros(n);
    Mat::from_fn(half.rows(), n * n, |r, c| {
        half[(r, s.index_of(c % n, c / n))]
    })
}

impl<T: Real> RegressionData<T> {
    pub fn rows(&self) -> usize {
        self.i_zz.rows()
    }

    /// `∫ zeta ⊗ zeta` per interval, all `n_zeta^2` entries.
    pub fn i_zz_full(&self) -> Mat<T> {
        expand_full(&self.i_zz, self.n_zeta)
    }

    /// `zeta ⊗ zeta` boundary differences, all `n_zeta^2` entries.
    pub fn d_zz_full(&self) -> Mat<T> {
        expand_full(&self.d_zz, self.n_zeta)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["t_start".to_string(), "t_end".to_string()];
        let pairs: Vec<(usize, usize)> = (0..self.n_zeta)
            .flat_map(|j| (j..self.n_zeta).map(move |i| (i, j)))
            .collect();
        h.extend(
            pairs
                .iter()
                .map(|(i, j)| format!("izz_{}_{}", i + 1, j + 1)),
        );
        for i in 0..self.n_zeta {
            h.extend((0..self.m).map(|k| format!("izu_{}_{}", i + 1, k + 1)));
        }
        for i in 0..self.p {
            h.extend((0..self.p).map(|j| format!("iyy_{}_{}", i + 1, j + 1)));
        }
        h.extend(
            pairs
                .iter()
                .map(|(i, j)| format!("dzz_{}_{}", i + 1, j + 1)),
        );
        h
    }

    /// One row per interval, 17 significant digits; the header encodes the dimensions.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header().join(","))?;
        for r in 0..self.rows() {
            write!(
                w,
                "{:.16e},{:.16e}",
                self.partition[r],
                self.partition[r + 1]
            )?;
            for m in [&self.i_zz, &self.i_zu, &self.i_yy, &self.d_zz] {
                for c in 0..m.cols() {
                    write!(w, ",{:.16e}", m[(r, c)])?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, ViError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| ViError::Parse("empty file".into()))?
            .map_err(|e| ViError::Parse(e.to_string()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let count = |prefix: &str| cols.iter().filter(|c| c.starts_with(prefix)).count();
        let (n_zz, n_zu, n_yy, n_dz) = (count("izz_"), count("izu_"), count("iyy_"), count("dzz_"));
        let n_zeta = (0..=n_zz).find(|&k| half_len(k) == n_zz).filter(|&k| k > 0);
        let Some(n_zeta) = n_zeta else {
            return Err(ViError::Parse(format!(
                "{n_zz} izz columns is not a triangular number"
            )));
        };
        let p = (1..=n_yy).find(|&k| k * k == n_yy);
        let (Some(p), true, true) = (p, n_zu % n_zeta == 0 && n_zu > 0, n_dz == n_zz) else {
            return Err(ViError::Parse("inconsistent column groups".into()));
        };
        let m = n_zu / n_zeta;
        let expected = 2 + n_zz + n_zu + n_yy + n_dz;
        if cols.len() != expected || cols[0] != "t_start" || cols[1] != "t_end" {
            return Err(ViError::Parse("unexpected header layout".into()));
        }
        let mut rows: Vec<Vec<T>> = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| ViError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|v| v.trim().parse::<f64>().map(T::lit))
                .collect::<Result<Vec<T>, _>>()
                .map_err(|e| ViError::Parse(format!("row {}: {e}", k + 1)))?;
            if vals.len() != expected {
                return Err(ViError::Parse(format!(
                    "row {} has {} fields",
                    k + 1,
                    vals.len()
                )));
            }
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(ViError::Parse("no data rows".into()));
        }
        let l = rows.len();
        let take = |start: usize, width: usize| Mat::from_fn(l, width, |r, c| rows[r][start + c]);
        let mut partition: Vec<T> = rows.iter().map(|r| r[0]).collect();
        partition.push(rows[l - 1][1]);
        Ok(Self {
            n_zeta,
            m,
            p,
            partition,
            i_zz: take(2, n_zz),
            i_zu: take(2 + n_zz, n_zu),
            i_yy: take(2 + n_zz + n_zu, n_yy),
            d_zz: take(2 + n_zz + n_zu + n_yy, n_dz),
        })
    }
}

/// Output of a data-collection run.
#[derive(Clone, Debug)]
pub struct Collection<T> {
    pub log: TrajectoryLog<T>,
    pub data: RegressionData<T>,
}

/// Runs plant, filter and transverse coordinate under `input`, sampling every
/// `interval` up to `horizon`. Each interval becomes one regression row; the
/// accumulators are reset at every boundary.
pub fn collect<T: Real, I: InputLaw<T>>(
    plant: &LtiPlant<T>,
    filter: &FilterBank<T>,
    input: I,
    dt: T,
    interval: T,
    horizon: T,
) -> Result<Collection<T>, ViError> {
    let (n_zeta, m, p) = (filter.n_zeta(), plant.m(), plant.p());
    let acc = RegressionAccumulator::new(n_zeta, m, p);
    let (nzz, nzu, nyy) = (acc.zz_len(), acc.zu_len(), acc.yy_len());
    let mut ode = step_coupled(plant, filter, input, acc, dt)?;
    let mut log = TrajectoryLog::new();
    let mut partition = Vec::new();
    let mut zz_rows: Vec<Vec<T>> = Vec::new();
    let mut zu_rows: Vec<Vec<T>> = Vec::new();
    let mut yy_rows: Vec<Vec<T>> = Vec::new();
    let mut dz_rows: Vec<Vec<T>> = Vec::new();
    let mut prev_products = vec![T::zero(); nzz];
    let mut products = vec![T::zero(); nzz];
    simulate(&mut ode, interval, horizon, |o| {
        let t = o.t();
        let (sys, state) = o.parts_mut();
        let layout = sys.layout().clone();
        let sample = sys.observe(t, state);
        unique_products(&sample.zeta, &mut products);
        if !partition.is_empty() {
            let extra = &state[layout.extra()];
            zz_rows.push(extra[..nzz].to_vec());
            zu_rows.push(extra[nzz..nzz + nzu].to_vec());
            yy_rows.push(extra[nzz + nzu..nzz + nzu + nyy].to_vec());
            dz_rows.push(
                products
                    .iter()
                    .zip(&prev_products)
                    .map(|(&a, &b)| a - b)
                    .collect(),
            );
        }
        state[layout.extra()].fill(T::zero());
        std::mem::swap(&mut prev_products, &mut products);
        partition.push(t);
        log.push(sample);
    })?;
    let to_mat = |rows: &[Vec<T>], w: usize| Mat::from_fn(rows.len(), w, |r, c| rows[r][c]);
    let data = RegressionData {
        n_zeta,
        m,
        p,
        i_zz: to_mat(&zz_rows, nzz),
        i_zu: to_mat(&zu_rows, nzu),
        i_yy: to_mat(&yy_rows, nyy),
        d_zz: to_mat(&dz_rows, nzz),
        partition,
    };
    Ok(Collection { log, data })
}
