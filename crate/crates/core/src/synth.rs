//! Synthetic regression data with a known mean and noise law.
//!
//! Features are uniform on the unit cube and the mean is
//! `f(x) = 3 x1 + sin(4 pi x1) x2` (the second term is dropped when `d = 1`).
//! Spatial datasets place samples on a jittered grid over a 100 m square and
//! use the normalized coordinates as the first two features.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{validate_dataset, Dataset};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Side length of the spatial domain in meters.
pub const DOMAIN_SIZE: f64 = 100.0;

const FEATURES: u64 = 0x6665_6174;
const NOISE: u64 = 0x6e6f_6973;
const COORDS: u64 = 0x63_6f6f_7264;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Constant noise standard deviation.
    Homoscedastic { sigma: f64 },
    /// Noise standard deviation `0.1 + 0.9 x1`.
    Heteroscedastic,
}

impl NoiseModel {
    pub fn sd(&self, x1: f64) -> f64 {
        match *self {
            NoiseModel::Homoscedastic { sigma } => sigma,
            NoiseModel::Heteroscedastic => 0.1 + 0.9 * x1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub noise: NoiseModel,
    pub spatial: bool,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidConfig(format!("synthetic data needs n >= 10, got {}", self.n)));
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig("synthetic data needs d >= 1".into()));
        }
        if let NoiseModel::Homoscedastic { sigma } = self.noise {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::hyper("sigma", sigma));
            }
        }
        Ok(())
    }
}

/// The noiseless mean function.
pub fn mean_function(x: &[f64]) -> f64 {
    let x2 = x.get(1).copied().unwrap_or(0.0);
    3.0 * x[0] + (4.0 * PI * x[0]).sin() * x2
}

/// Jittered grid: the square is cut into `g x g` cells with `g^2 >= n`,
/// `n` cells are drawn without replacement and each sample lands uniformly
/// inside its cell.
fn jittered_grid(n: usize, rng: &SeededRng) -> Array2<f64> {
    let g = (n as f64).sqrt().ceil() as usize;
    let cell = DOMAIN_SIZE / g as f64;
    let mut gen = rng.generator();
    let mut cells: Vec<usize> = (0..g * g).collect();
    cells.shuffle(&mut gen);
    let mut coords = Array2::zeros((n, 2));
    for (i, &c) in cells.iter().take(n).enumerate() {
        coords[[i, 0]] = ((c % g) as f64 + gen.random::<f64>()) * cell;
        coords[[i, 1]] = ((c / g) as f64 + gen.random::<f64>()) * cell;
    }
    coords
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let root = SeededRng::new(spec.seed);
    let mut gen = root.derive(FEATURES).generator();
    let mut x = Array2::from_shape_fn((spec.n, spec.d), |_| gen.random::<f64>());
    let coords = spec.spatial.then(|| {
        let c = jittered_grid(spec.n, &root.derive(COORDS));
        for j in 0..spec.d.min(2) {
            x.column_mut(j).assign(&c.column(j).mapv(|v| v / DOMAIN_SIZE));
        }
        c
    });

    let mut noise_gen = root.derive(NOISE).generator();
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let y = Array1::from_shape_fn(spec.n, |i| {
        let row = x.row(i).to_vec();
        mean_function(&row) + spec.noise.sd(row[0]) * standard.sample(&mut noise_gen)
    });
    validate_dataset(x, y, coords)
}
