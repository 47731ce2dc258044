use crate::plant::PlantError;
use crate::Real;

/// Right-hand side of `x' = f(t, x)`.
pub trait Rhs<T> {
    fn eval(&mut self, t: T, x: &[T], dx: &mut [T]);
}

impl<T, F: FnMut(T, &[T], &mut [T])> Rhs<T> for F {
    fn eval(&mut self, t: T, x: &[T], dx: &mut [T]) {
        self(t, x, dx)
    }
}

/// Fixed-step classical Runge-Kutta integrator over a concatenated state.
pub struct CoupledOde<T, F> {
    rhs: F,
    state: Vec<T>,
    t0: T,
    steps: u64,
    dt: T,
    k: [Vec<T>; 4],
    tmp: Vec<T>,
}

impl<T: Real, F: Rhs<T>> CoupledOde<T, F> {
    pub fn new(rhs: F, state: Vec<T>, t0: T, dt: T) -> Result<Self, PlantError> {
        if !(dt > T::zero()) {
            return Err(PlantError::BadStep {
                dt: dt.as_f64(),
                interval: 0.0,
            });
        }
        let n = state.len();
        Ok(Self {
            rhs,
            state,
            t0,
            steps: 0,
            dt,
            k: std::array::from_fn(|_| vec![T::zero(); n]),
            tmp: vec![T::zero(); n],
        })
    }

    /// Current time, computed as `t0 + steps * dt` so it does not drift.
    pub fn t(&self) -> T {
        self.t0 + T::lit(self.steps as f64) * self.dt
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn state(&self) -> &[T] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [T] {
        &mut self.state
    }

    pub fn rhs_mut(&mut self) -> &mut F {
        &mut self.rhs
    }

    /// Simultaneous access to the right-hand side and the state.
    pub fn parts_mut(&mut self) -> (&mut F, &mut [T]) {
        (&mut self.rhs, &mut self.state)
    }

    pub fn into_parts(self) -> (F, Vec<T>) {
        (self.rhs, self.state)
    }

    pub fn step(&mut self) {
        let t = self.t();
        let h = self.dt;
        let half = h * T::lit(0.5);
        let [k1, k2, k3, k4] = &mut self.k;
        self.rhs.eval(t, &self.state, k1);
        for ((s, x), d) in self.tmp.iter_mut().zip(&self.state).zip(k1.iter()) {
            *s = *x + half * *d;
        }
        self.rhs.eval(t + half, &self.tmp, k2);
        for ((s, x), d) in self.tmp.iter_mut().zip(&self.state).zip(k2.iter()) {
            *s = *x + half * *d;
        }
        self.rhs.eval(t + half, &self.tmp, k3);
        for ((s, x), d) in self.tmp.iter_mut().zip(&self.state).zip(k3.iter()) {
            *s = *x + h * *d;
        }
        self.rhs.eval(t + h, &self.tmp, k4);
        let sixth = h / T::lit(6.0);
        for (i, x) in self.state.iter_mut().enumerate() {
            *x += sixth * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]);
        }
        self.steps += 1;
    }
}

/// Integrates to `t_end`, calling `on_sample` at `t0` and after every
/// `sample_interval`. The callback may modify the state (e.g. reset accumulators).
pub fn simulate<T: Real, F: Rhs<T>>(
    ode: &mut CoupledOde<T, F>,
    sample_interval: T,
    t_end: T,
    mut on_sample: impl FnMut(&mut CoupledOde<T, F>),
) -> Result<(), PlantError> {
    let ratio = (sample_interval / ode.dt()).as_f64();
    let per_sample = ratio.round();
    if per_sample < 1.0 || (ratio - per_sample).abs() > 1e-6 * ratio.max(1.0) {
        return Err(PlantError::BadStep {
            dt: ode.dt().as_f64(),
            interval: sample_interval.as_f64(),
        });
    }
    let per_sample = per_sample as u64;
    let span = ((t_end - ode.t()) / sample_interval).as_f64();
    let samples = (span + 1e-9).floor().max(0.0) as u64;
    on_sample(ode);
    for _ in 0..samples {
        for _ in 0..per_sample {
            ode.step();
        }
        if !ode.state().iter().all(|x| x.is_finite()) {
            return Err(PlantError::NonFiniteState {
                t: ode.t().as_f64(),
            });
        }
        on_sample(ode);
    }
    Ok(())
}
