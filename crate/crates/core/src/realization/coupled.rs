use std::ops::Range;

use crate::plant::{CoupledOde, LtiPlant, Sample};
use crate::realization::{FilterBank, RealizationError};
use crate::Real;

/// Input law `u = law(t, zeta)`. Sees only the learner-visible coordinate.
pub trait InputLaw<T> {
    fn input(&mut self, t: T, zeta: &[T], u: &mut [T]);
}

impl<T, F: FnMut(T, &[T], &mut [T])> InputLaw<T> for F {
    fn input(&mut self, t: T, zeta: &[T], u: &mut [T]) {
        self(t, zeta, u)
    }
}

/// Extra states integrated in lock-step with plant and filter, driven by measured signals.
pub trait CoIntegrated<T> {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn derivative(&mut self, zeta: &[T], u: &[T], y: &[T], out: &mut [T]);
}

/// Placeholder when nothing is co-integrated.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoAccumulator;

impl<T> CoIntegrated<T> for NoAccumulator {
    fn len(&self) -> usize {
        0
    }

    fn derivative(&mut self, _: &[T], _: &[T], _: &[T], _: &mut [T]) {}
}

/// Positions of the blocks in the joint state `[x; vec(Z); eps; extra]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateLayout {
    pub n: usize,
    pub n_z: usize,
    pub extra: usize,
}

impl StateLayout {
    pub fn x(&self) -> Range<usize> {
        0..self.n
    }

    pub fn z(&self) -> Range<usize> {
        self.n..self.n + self.n_z
    }

    pub fn eps(&self) -> Range<usize> {
        self.n + self.n_z..2 * self.n + self.n_z
    }

    /// `[vec(Z); eps]`, contiguous in the joint state.
    pub fn zeta(&self) -> Range<usize> {
        self.n..2 * self.n + self.n_z
    }

    pub fn extra(&self) -> Range<usize> {
        let s = 2 * self.n + self.n_z;
        s..s + self.extra
    }

    pub fn len(&self) -> usize {
        2 * self.n + self.n_z + self.extra
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Joint right-hand side for plant, filter, transverse coordinate and accumulators.
pub struct CoupledSystem<'a, T, I, E> {
    plant: &'a LtiPlant<T>,
    filter: &'a FilterBank<T>,
    input: I,
    extra: E,
    layout: StateLayout,
    u: Vec<T>,
    y: Vec<T>,
}

impl<'a, T: Real, I: InputLaw<T>, E: CoIntegrated<T>> CoupledSystem<'a, T, I, E> {
    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn accumulator(&self) -> &E {
        &self.extra
    }

    pub fn accumulator_mut(&mut self) -> &mut E {
        &mut self.extra
    }

    pub fn input_law_mut(&mut self) -> &mut I {
        &mut self.input
    }

    /// Learner-visible record at time `t`: the input the law applies, the measured output and zeta.
    pub fn observe(&mut self, t: T, state: &[T]) -> Sample<T> {
        let zeta = &state[self.layout.zeta()];
        let mut u = vec![T::zero(); self.plant.m()];
        self.input.input(t, zeta, &mut u);
        Sample {
            t,
            u,
            y: self.plant.output(&state[self.layout.x()]),
            zeta: zeta.to_vec(),
        }
    }

    fn eval(&mut self, t: T, s: &[T], ds: &mut [T]) {
        let l = &self.layout;
        let (x, zeta) = (&s[l.x()], &s[l.zeta()]);
        self.input.input(t, zeta, &mut self.u);
        let c = self.plant.c();
        for (i, yi) in self.y.iter_mut().enumerate() {
            *yi = (0..l.n).map(|j| c[(i, j)] * x[j]).sum();
        }
        self.plant.derivative(x, &self.u, &mut ds[l.x()]);
        self.filter
            .z_derivative(&s[l.z()], &self.y, &self.u, &mut ds[l.z()]);
        self.filter.eps_derivative(&s[l.eps()], &mut ds[l.eps()]);
        let r = l.extra();
        self.extra.derivative(zeta, &self.u, &self.y, &mut ds[r]);
    }
}

impl<T: Real, I: InputLaw<T>, E: CoIntegrated<T>> crate::plant::Rhs<T>
    for CoupledSystem<'_, T, I, E>
{
    fn eval(&mut self, t: T, x: &[T], dx: &mut [T]) {
        CoupledSystem::eval(self, t, x, dx)
    }
}

/// Assembles the joint ODE started at `[x0; 0; 1_n; 0]`.
pub fn step_coupled<'a, T: Real, I: InputLaw<T>, E: CoIntegrated<T>>(
    plant: &'a LtiPlant<T>,
    filter: &'a FilterBank<T>,
    input: I,
    extra: E,
    dt: T,
) -> Result<CoupledOde<T, CoupledSystem<'a, T, I, E>>, RealizationError> {
    if plant.n() != filter.n() || plant.m() != filter.m() || plant.p() != filter.p() {
        return Err(RealizationError::Dimension(format!(
            "plant (n, m, p) = ({}, {}, {}) but filter built for ({}, {}, {})",
            plant.n(),
            plant.m(),
            plant.p(),
            filter.n(),
            filter.m(),
            filter.p()
        )));
    }
    let layout = StateLayout {
        n: plant.n(),
        n_z: filter.n_z(),
        extra: extra.len(),
    };
    let mut state = vec![T::zero(); layout.len()];
    state[layout.x()].copy_from_slice(plant.x0());
    state[layout.zeta()].copy_from_slice(&filter.zeta0());
    let sys = CoupledSystem {
        plant,
        filter,
        input,
        extra,
        layout,
        u: vec![T::zero(); plant.m()],
        y: vec![T::zero(); plant.p()],
    };
    Ok(CoupledOde::new(sys, state, T::zero(), dt)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::Mat;
    use crate::plant::simulate;

    #[test]
    fn unforced_filter_stays_zero_and_eps_decays() {
        let plant = LtiPlant::<f64>::f16(vec![0.0; 3]).unwrap();
        let m = Mat::from_f64_rows(&[&[-1.0, 0.0, 0.0], &[1.0, -2.0, 0.0], &[0.0, 2.0, -3.0]]);
        let filter = FilterBank::build(3, 1, 1, m).unwrap();
        let mut ode = step_coupled(
            &plant,
            &filter,
            |_: f64, _: &[f64], u: &mut [f64]| u.fill(0.0),
            NoAccumulator,
            1e-3,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        simulate(&mut ode, 0.01, 2.0, |o| {
            let t = o.t();
            let (sys, s) = o.parts_mut();
            let l = sys.layout().clone();
            assert!(s[l.z()].iter().all(|&v| v == 0.0));
            for (k, lam) in [-1.0, -2.0, -3.0].iter().enumerate() {
                worst = worst.max((s[l.eps()][k] - (lam * t).exp()).abs());
            }
        })
        .unwrap();
        assert!(worst < 1e-10, "{worst:e}");
    }
}
