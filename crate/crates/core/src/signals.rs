// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic test signals and the runtime-scaling scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CssdError, Result};
use crate::model::DataSeries;

/// Bessel-based signal with jumps at 0.3, 0.4 and 0.6:
/// `J1(20x) + x * 1[0.3, 0.4](x) - x * 1[0.6, 1](x)`.
pub fn g1(x: f64) -> f64 {
    let mut y = libm::j1(20.0 * x);
    if (0.3..=0.4).contains(&x) {
        y += x;
    }
    if (0.6..=1.0).contains(&x) {
        y -= x;
    }
    y
}

/// HeaviSine: `4 sin(4 pi x) - sign(x - 0.3) - sign(0.72 - x)`, with jumps
/// at 0.3 and 0.72.
pub fn heavisine(x: f64) -> f64 {
    4.0 * (4.0 * std::f64::consts::PI * x).sin() - sign(x - 0.3) - sign(0.72 - x)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Jump locations of [`g1`].
pub const G1_JUMPS: [f64; 3] = [0.3, 0.4, 0.6];
/// Jump locations of [`heavisine`].
pub const HEAVISINE_JUMPS: [f64; 2] = [0.3, 0.72];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signal {
    G1,
    HeaviSine,
}

impl Signal {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Signal::G1 => g1(x),
            Signal::HeaviSine => heavisine(x),
        }
    }

    pub fn jumps(self) -> &'static [f64] {
        match self {
            Signal::G1 => &G1_JUMPS,
            Signal::HeaviSine => &HEAVISINE_JUMPS,
        }
    }
}

/// Placement of the sample sites in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sites {
    /// `x_i = i / (n - 1)`.
    Equidistant,
    /// Sorted independent uniform draws.
    UniformRandom,
}

/// Samples `signal` at `n` sites with additive Gaussian noise of standard
/// deviation `sigma`. Every `delta_i` is `sigma`, or 1 for noiseless
/// samples.
pub fn sample(
    signal: Signal,
    n: usize,
    sigma: f64,
    sites: Sites,
    seed: u64,
) -> Result<DataSeries<f64>> {
    if n == 0 {
        return Err(CssdError::EmptyInput);
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CssdError::NonPositiveDelta { index: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = match sites {
        Sites::Equidistant if n == 1 => vec![0.0],
        Sites::Equidistant => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        Sites::UniformRandom => {
            let mut xs: Vec<f64> = Vec::with_capacity(n);
            while xs.len() < n {
                xs.push(rng.random::<f64>());
                if xs.len() == n {
                    xs.sort_by(f64::total_cmp);
                    xs.dedup();
                }
            }
            xs
        }
    };
    let noise = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    let ys = xs
        .iter()
        .map(|&x| signal.eval(x) + noise.sample(&mut rng))
        .collect();
    let delta = if sigma > 0.0 { sigma } else { 1.0 };
    DataSeries::scalar(xs, ys, vec![delta; n])
}

/// Smoothing weight of the runtime scenarios.
pub const BENCH_P: f64 = 0.9999;
/// Jump penalty of the runtime scenarios.
pub const BENCH_GAMMA: f64 = 20.0;
/// Samples per period in the repeated scenario.
pub const BENCH_PERIOD: usize = 200;
/// Standard deviation assigned to the noiseless benchmark samples.
pub const BENCH_DELTA: f64 = 0.01;

/// HeaviSine on `n` cell-centred sites of `[0, 1]`: the jump count stays at
/// two as `n` grows.
pub fn bench_densified(n: usize) -> Result<DataSeries<f64>> {
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let ys = xs.iter().map(|&x| heavisine(x)).collect();
    DataSeries::scalar(xs, ys, vec![BENCH_DELTA; n])
}

/// HeaviSine repeated with period 1 and [`BENCH_PERIOD`] samples per
/// period: the jump count grows linearly with `n`.
pub fn bench_repeated(n: usize) -> Result<DataSeries<f64>> {
    let xs: Vec<f64> = (0..n)
        .map(|i| (i as f64 + 0.5) / BENCH_PERIOD as f64)
        .collect();
    let ys = xs.iter().map(|&x| heavisine(x - x.floor())).collect();
    DataSeries::scalar(xs, ys, vec![BENCH_DELTA; n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signals_jump_where_documented() {
        let e = 1e-9;
        for &t in &HEAVISINE_JUMPS {
            assert!((heavisine(t + e) - heavisine(t - e)).abs() > 1.9);
        }
        for &t in &[0.4, 0.6] {
            assert!((g1(t + e) - g1(t - e)).abs() > 0.39);
        }
        assert!((g1(0.3 - e) - g1(0.3 + e)).abs() > 0.29);
        assert!((g1(0.5 + e) - g1(0.5 - e)).abs() < 1e-6);
    }

    #[test]
    fn bessel_values() {
        assert!((g1(0.05) - 0.440_050_585_744_933_5).abs() < 1e-12);
        assert!((g1(0.0)).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample(Signal::G1, 100, 0.1, Sites::UniformRandom, 4).unwrap();
        let b = sample(Signal::G1, 100, 0.1, Sites::UniformRandom, 4).unwrap();
        let c = sample(Signal::G1, 100, 0.1, Sites::UniformRandom, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 100);
        assert!(a.deltas().iter().all(|&d| d == 0.1));
    }

    #[test]
    fn noiseless_equidistant_samples() {
        let s = sample(Signal::HeaviSine, 5, 0.0, Sites::Equidistant, 0).unwrap();
        assert_eq!(s.xs(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(s.deltas(), &[1.0; 5]);
        assert_eq!(s.column(0)[2], heavisine(0.5));
    }

    #[test]
    fn bench_scenarios_have_expected_shape() {
        let d = bench_densified(400).unwrap();
        assert_eq!(d.len(), 400);
        assert!(d.xs()[399] < 1.0);
        let r = bench_repeated(600).unwrap();
        assert!((r.xs()[599] - 2.9975).abs() < 1e-12);
        assert!((r.column(0)[0] - r.column(0)[200]).abs() < 1e-9);
    }
}
