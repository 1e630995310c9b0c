//! Shared fixtures for the benchmarks.

use binuq_core::synth::{generate, NoiseModel, SynthSpec};
use binuq_core::{Dataset, ProbabilisticPrediction, SeededRng};
use rand::Rng;

pub fn dataset(n: usize, spatial: bool) -> Dataset {
    generate(&SynthSpec {
        n,
        d: 2,
        noise: NoiseModel::Heteroscedastic,
        spatial,
        seed: 7,
    })
    .expect("valid synthetic spec")
}

/// A random discrete distribution over `k` sorted support points.
pub fn distribution(k: usize, seed: u64) -> ProbabilisticPrediction {
    let mut gen = SeededRng::new(seed).generator();
    let support: Vec<f64> = (0..k).map(|i| i as f64 + gen.random::<f64>() * 0.5).collect();
    let raw: Vec<f64> = (0..k).map(|_| gen.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    ProbabilisticPrediction::new(support, raw.iter().map(|p| p / total).collect()).expect("valid distribution")
}
