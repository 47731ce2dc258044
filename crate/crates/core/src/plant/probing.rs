use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Real;

/// One sinusoid `amplitude * sin(frequency * t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbingTerm<T> {
    pub amplitude: T,
    pub frequency: T,
    pub phase: T,
}

/// Parameter ranges of a sum-of-sinusoids probing signal.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbingSpec {
    pub count: usize,
    pub amp_base: f64,
    pub amp_range: [f64; 2],
    pub freq_range: [f64; 2],
    pub phase_range: [f64; 2],
}

impl Default for ProbingSpec {
    fn default() -> Self {
        Self {
            count: 100,
            amp_base: 20.0,
            amp_range: [0.0, 20.0],
            freq_range: [-500.0, 500.0],
            phase_range: [0.0, TAU],
        }
    }
}

/// Sum of sinusoids per input channel, reconstructible from its seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbingSignal<T> {
    pub channels: Vec<Vec<ProbingTerm<T>>>,
    pub seed: u64,
}

fn draw(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.gen_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Draws `spec.count` terms per channel, uniformly from the ranges in `spec`.
/// Channels are filled in order from one ChaCha8 stream.
pub fn make_probing<T: Real>(seed: u64, spec: &ProbingSpec, channels: usize) -> ProbingSignal<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = (0..channels)
        .map(|_| {
            (0..spec.count)
                .map(|_| {
                    let iota = draw(&mut rng, spec.amp_range);
                    let omega = draw(&mut rng, spec.freq_range);
                    let phi = draw(&mut rng, spec.phase_range);
                    ProbingTerm {
                        amplitude: T::lit(spec.amp_base + iota),
                        frequency: T::lit(omega),
                        phase: T::lit(phi),
                    }
                })
                .collect()
        })
        .collect();
    ProbingSignal { channels, seed }
}

impl<T: Real> ProbingSignal<T> {
    pub fn zero(channels: usize) -> Self {
        Self {
            channels: vec![Vec::new(); channels],
            seed: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    pub fn eval_into(&self, t: T, out: &mut [T]) {
        for (o, terms) in out.iter_mut().zip(&self.channels) {
            *o = terms
                .iter()
                .map(|k| k.amplitude * (k.frequency * t + k.phase).sin())
                .sum();
        }
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.channels()];
        self.eval_into(t, &mut out);
        out
    }

    /// Triangle-inequality bound on `|e_k(t)|`, per channel.
    pub fn amplitude_bound(&self) -> Vec<T> {
        self.channels
            .iter()
            .map(|terms| terms.iter().map(|k| k.amplitude.abs()).sum())
            .collect()
    }
}

/// Seeded random direction: entries uniform on `[-1, 1]`, then normalized.
pub fn random_unit_vector<T: Real>(seed: u64, n: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| T::lit(x / norm)).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vector_is_unit_and_seeded() {
        let a: Vec<f64> = random_unit_vector(5, 3);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(a, random_unit_vector::<f64>(5, 3));
        assert_ne!(a, random_unit_vector::<f64>(6, 3));
    }

    #[test]
    fn empty_signal_is_zero() {
        let spec = ProbingSpec {
            count: 0,
            ..ProbingSpec::default()
        };
        let e = make_probing::<f64>(3, &spec, 1);
        assert_eq!(e.eval(1.234), vec![0.0]);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = ProbingSpec::default();
        let a = make_probing::<f64>(7, &spec, 1);
        let b = make_probing::<f64>(7, &spec, 1);
        let c = make_probing::<f64>(8, &spec, 1);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn draws_respect_ranges() {
        let spec = ProbingSpec::default();
        let e = make_probing::<f64>(11, &spec, 2);
        for k in e.channels.iter().flatten() {
            assert!((20.0..40.0).contains(&k.amplitude));
            assert!((-500.0..500.0).contains(&k.frequency));
            assert!((0.0..TAU).contains(&k.phase));
        }
        assert!(e.amplitude_bound().iter().all(|&b| b <= 4000.0));
    }
}
