//! Multinomial logistic regression fit by gradient descent with a
//! backtracking line search.
//!
//! Features are standardized internally (constant columns dropped). Only the
//! classes present in the training labels get parameters; absent classes
//! receive probability zero. The intercepts are not penalized.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::Hyperparams;
use crate::error::{Error, Result};

pub const GRID_DIMENSIONS: [&str; 3] = ["l2", "max_iter", "tol"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SoftmaxParams {
    fn default() -> Self {
        SoftmaxParams {
            l2: 1e-2,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

impl SoftmaxParams {
    pub fn from_hyperparams(hp: &Hyperparams) -> Result<Self> {
        let mut p = SoftmaxParams::default();
        for (name, value) in hp {
            match name.as_str() {
                "l2" => p.l2 = value.as_f64().ok_or_else(|| Error::hyper(name, value))?,
                "tol" => p.tol = value.as_f64().ok_or_else(|| Error::hyper(name, value))?,
                "max_iter" => {
                    p.max_iter = value
                        .as_i64()
                        .filter(|v| *v > 0)
                        .ok_or_else(|| Error::hyper(name, value))? as usize
                }
                _ => return Err(Error::hyper(name, value)),
            }
        }
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.l2 > 0.0 && self.l2.is_finite()) {
            return Err(Error::hyper("l2", self.l2));
        }
        if !(self.tol > 0.0) {
            return Err(Error::hyper("tol", self.tol));
        }
        if self.max_iter == 0 {
            return Err(Error::hyper("max_iter", self.max_iter));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    n_classes: usize,
    n_features: usize,
    /// Input columns kept after dropping constants, with their mean and sd.
    kept: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    /// 0-based labels of the classes that carry parameters.
    present: Vec<usize>,
    /// `present.len() x (kept.len() + 1)`, last column is the intercept.
    weights: Array2<f64>,
    converged: bool,
    iterations: usize,
}

impl SoftmaxClassifier {
    /// `labels` are 1-based in `1..=n_classes`.
    pub fn fit(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, params: &SoftmaxParams) -> Result<Self> {
        params.validate()?;
        let labels = super::zero_based_labels(x.nrows(), labels, n_classes)?;
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset("no training rows"));
        }

        let mut kept = Vec::new();
        let mut center = Vec::new();
        let mut scale = Vec::new();
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let mean = col.sum() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 0.0 {
                kept.push(j);
                center.push(mean);
                scale.push(sd);
            }
        }

        let mut present: Vec<usize> = labels.clone();
        present.sort_unstable();
        present.dedup();
        let mut model = SoftmaxClassifier {
            n_classes,
            n_features: x.ncols(),
            weights: Array2::zeros((present.len(), kept.len() + 1)),
            kept,
            center,
            scale,
            present,
            converged: true,
            iterations: 0,
        };
        if model.present.len() == 1 {
            return Ok(model);
        }

        let design = model.design(x);
        let slot: Vec<usize> = labels
            .iter()
            .map(|l| model.present.binary_search(l).expect("label is present"))
            .collect();
        let problem = Objective {
            design: &design,
            slot: &slot,
            l2: params.l2,
        };

        let mut w = model.weights.clone();
        let (mut loss, mut grad) = problem.evaluate(&w);
        let mut step = 1.0;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < params.max_iter {
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() <= params.tol {
                converged = true;
                break;
            }
            iterations += 1;
            step *= 2.0;
            loop {
                let trial = &w - &(&grad * step);
                let trial_loss = problem.loss(&trial);
                if trial_loss <= loss - 0.5 * step * gnorm2 || step < 1e-20 {
                    w = trial;
                    break;
                }
                step *= 0.5;
            }
            (loss, grad) = problem.evaluate(&w);
        }
        if !converged {
            converged = grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= params.tol;
        }
        model.weights = w;
        model.converged = converged;
        model.iterations = iterations;
        Ok(model)
    }

    /// False when `max_iter` was reached before the gradient-norm tolerance;
    /// the model remains usable.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Coefficients on the standardized features, one row per present class.
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    fn design(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let p = self.kept.len();
        let mut out = Array2::ones((x.nrows(), p + 1));
        for (c, &j) in self.kept.iter().enumerate() {
            let col = x.column(j).mapv(|v| (v - self.center[c]) / self.scale[c]);
            out.column_mut(c).assign(&col);
        }
        out
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "feature columns",
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        if self.present.len() == 1 {
            out.column_mut(self.present[0]).fill(1.0);
            return Ok(out);
        }
        let logits = self.design(x).dot(&self.weights.t());
        for (i, row) in logits.rows().into_iter().enumerate() {
            let probs = softmax(row.to_owned());
            for (slot, &class) in self.present.iter().enumerate() {
                out[[i, class]] = probs[slot];
            }
        }
        Ok(out)
    }
}

fn softmax(mut z: Array1<f64>) -> Array1<f64> {
    let max = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    z.mapv_inplace(|v| (v - max).exp());
    let total = z.sum();
    z / total
}

struct Objective<'a> {
    design: &'a Array2<f64>,
    slot: &'a [usize],
    l2: f64,
}

impl Objective<'_> {
    fn penalty(&self, w: &Array2<f64>) -> f64 {
        let p = w.ncols() - 1;
        self.l2 * w.slice(ndarray::s![.., ..p]).iter().map(|v| v * v).sum::<f64>()
    }

    fn loss(&self, w: &Array2<f64>) -> f64 {
        let logits = self.design.dot(&w.t());
        let n = self.design.nrows() as f64;
        let mut total = 0.0;
        for (row, &y) in logits.rows().into_iter().zip(self.slot) {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[y];
        }
        total / n + self.penalty(w)
    }

    fn evaluate(&self, w: &Array2<f64>) -> (f64, Array2<f64>) {
        let logits = self.design.dot(&w.t());
        let n = self.design.nrows() as f64;
        let mut residual = Array2::zeros(logits.raw_dim());
        let mut total = 0.0;
        for (i, (row, &y)) in logits.rows().into_iter().zip(self.slot).enumerate() {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[y];
            for (c, v) in row.iter().enumerate() {
                residual[[i, c]] = (v - lse).exp();
            }
            residual[[i, y]] -= 1.0;
        }
        let mut grad = residual.t().dot(self.design) / n;
        let p = w.ncols() - 1;
        let mut penalized = grad.slice_mut(ndarray::s![.., ..p]);
        penalized.scaled_add(2.0 * self.l2, &w.slice(ndarray::s![.., ..p]));
        (total / n + self.penalty(w), grad)
    }
}
