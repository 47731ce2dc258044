use std::io::{self, Write};

use crate::plant::WeightSpec;
use crate::Real;

/// One learner-visible record. The plant state is deliberately absent.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub u: Vec<T>,
    pub y: Vec<T>,
    pub zeta: Vec<T>,
}

/// Sampled `(t, u, y, zeta)` stream.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog<T> {
    pub samples: Vec<Sample<T>>,
}

impl<T: Real> TrajectoryLog<T> {
    pub fn new() -> Self {
        Self {
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, s: Sample<T>) {
        self.samples.push(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> T {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => T::zero(),
        }
    }

    /// Header `t,u_1..,y_1..,zeta_1..`, then one row per sample with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let Some(first) = self.samples.first() else {
            return writeln!(w, "t");
        };
        let mut header = vec!["t".to_string()];
        header.extend((1..=first.u.len()).map(|i| format!("u_{i}")));
        header.extend((1..=first.y.len()).map(|i| format!("y_{i}")));
        header.extend((1..=first.zeta.len()).map(|i| format!("zeta_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            write!(w, "{:.16e}", s.t)?;
            for v in s.u.iter().chain(&s.y).chain(&s.zeta) {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Trapezoidal integral of `y'Qy + u'Ru` over samples with `t <= horizon`.
pub fn eval_cost<T: Real>(traj: &TrajectoryLog<T>, w: &WeightSpec<T>, horizon: T) -> T {
    let Some(first) = traj.samples.first() else {
        return T::zero();
    };
    let limit = first.t + horizon + horizon.abs() * T::lit(1e-12);
    let mut total = T::zero();
    let mut prev: Option<(T, T)> = None;
    for s in traj.samples.iter().take_while(|s| s.t <= limit) {
        let f = w.stage_cost(&s.y, &s.u);
        if let Some((tp, fp)) = prev {
            total += (s.t - tp) * (f + fp) * T::lit(0.5);
        }
        prev = Some((s.t, f));
    }
    total
}
