use crate::Real;

/// Stochastic-approximation stepsizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    /// `γ_i = 1 / (offset + i)`.
    Harmonic { offset: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Harmonic { offset: 1.0 }
    }
}

impl StepSchedule {
    pub fn gamma<T: Real>(&self, i: usize) -> T {
        match *self {
            StepSchedule::Harmonic { offset } => T::lit(1.0 / (offset + i as f64)),
        }
    }
}
