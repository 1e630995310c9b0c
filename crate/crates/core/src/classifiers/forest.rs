//! Random forests of CART trees: a classifier that averages per-tree leaf
//! class frequencies (soft voting) and a regressor that averages leaf means.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, Target, TreeParams};
use super::{HyperValue, Hyperparams};
use crate::error::{Error, Result};
use crate::rng::{tags, SeededRng};

pub const DEFAULT_N_TREES: usize = 100;

pub const MAX_DEPTH_GRID: [i64; 4] = [4, 6, 8, 10];
pub const MIN_SAMPLES_LEAF_GRID: [i64; 3] = [1, 2, 4];
pub const MAX_SAMPLES_GRID: [f64; 3] = [0.6, 0.8, 1.0];

/// Hyperparameter names accepted by the forest backends.
pub const GRID_DIMENSIONS: [&str; 4] = ["max_depth", "max_features", "min_samples_leaf", "max_samples"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn count(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub min_samples_leaf: usize,
    /// Bootstrap sample size as a fraction of the training rows.
    pub max_samples: f64,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams {
            n_trees: DEFAULT_N_TREES,
            max_depth: 10,
            max_features: MaxFeatures::All,
            min_samples_leaf: 1,
            max_samples: 1.0,
        }
    }
}

impl RandomForestParams {
    /// Reads the grid dimensions from `hp`; values must come from the
    /// declared search grid. `n_trees` may also be set (any positive count).
    /// Missing dimensions keep their defaults.
    pub fn from_hyperparams(hp: &Hyperparams) -> Result<Self> {
        let mut p = RandomForestParams::default();
        for (name, value) in hp {
            match name.as_str() {
                "max_depth" => {
                    p.max_depth = match value.as_i64() {
                        Some(v) if MAX_DEPTH_GRID.contains(&v) => v as usize,
                        _ => return Err(Error::hyper(name, value)),
                    }
                }
                "min_samples_leaf" => {
                    p.min_samples_leaf = match value.as_i64() {
                        Some(v) if MIN_SAMPLES_LEAF_GRID.contains(&v) => v as usize,
                        _ => return Err(Error::hyper(name, value)),
                    }
                }
                "max_samples" => {
                    p.max_samples = match value.as_f64() {
                        Some(v) if MAX_SAMPLES_GRID.contains(&v) => v,
                        _ => return Err(Error::hyper(name, value)),
                    }
                }
                "n_trees" => {
                    p.n_trees = match value.as_i64() {
                        Some(v) if v > 0 => v as usize,
                        _ => return Err(Error::hyper(name, value)),
                    }
                }
                "max_features" => {
                    p.max_features = match value {
                        HyperValue::Str(s) if s == "sqrt" => MaxFeatures::Sqrt,
                        HyperValue::Str(s) if s == "log2" => MaxFeatures::Log2,
                        HyperValue::Str(s) if s == "all" => MaxFeatures::All,
                        v if v.as_f64() == Some(1.0) => MaxFeatures::All,
                        _ => return Err(Error::hyper(name, value)),
                    }
                }
                _ => return Err(Error::hyper(name, value)),
            }
        }
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::hyper("n_trees", self.n_trees));
        }
        if self.max_depth == 0 {
            return Err(Error::hyper("max_depth", self.max_depth));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::hyper("min_samples_leaf", self.min_samples_leaf));
        }
        if !(self.max_samples > 0.0 && self.max_samples <= 1.0) {
            return Err(Error::hyper("max_samples", self.max_samples));
        }
        Ok(())
    }

    fn tree_params(&self, d: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features.count(d),
        }
    }
}

fn grow_forest(
    x: ArrayView2<f64>,
    target: Target<'_>,
    params: &RandomForestParams,
    rng: &SeededRng,
) -> Result<Vec<DecisionTree>> {
    params.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset("no training rows"));
    }
    let draws = ((params.max_samples * n as f64).round() as usize).max(1);
    let tree_params = params.tree_params(x.ncols());
    let trees_stream = rng.derive(tags::TREE);
    Ok((0..params.n_trees)
        .map(|t| {
            let mut gen = trees_stream.derive(t as u64).generator();
            let samples: Vec<usize> = (0..draws).map(|_| gen.random_range(0..n)).collect();
            DecisionTree::fit(x, target, samples, tree_params, &mut gen)
        })
        .collect())
}

fn check_width(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: "feature columns",
            expected,
            found,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestClassifier {
    trees: Vec<DecisionTree>,
    n_classes: usize,
    n_features: usize,
}

impl RandomForestClassifier {
    /// `labels` are 1-based in `1..=n_classes`.
    pub fn fit(
        x: ArrayView2<f64>,
        labels: &[usize],
        n_classes: usize,
        params: &RandomForestParams,
        rng: &SeededRng,
    ) -> Result<Self> {
        let zero_based = super::zero_based_labels(x.nrows(), labels, n_classes)?;
        let trees = grow_forest(
            x,
            Target::Classes {
                labels: &zero_based,
                n_classes,
            },
            params,
            rng,
        )?;
        Ok(RandomForestClassifier {
            trees,
            n_classes,
            n_features: x.ncols(),
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_width(self.n_features, x.ncols())?;
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            let mut acc = out.row_mut(i);
            for tree in &self.trees {
                for (a, v) in acc.iter_mut().zip(tree.leaf_value(row)) {
                    *a += v;
                }
            }
            acc /= self.trees.len() as f64;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestRegressor {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl RandomForestRegressor {
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[f64],
        params: &RandomForestParams,
        rng: &SeededRng,
    ) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "target length",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        let trees = grow_forest(x, Target::Values(y), params, rng)?;
        Ok(RandomForestRegressor {
            trees,
            n_features: x.ncols(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> Result<f64> {
        check_width(self.n_features, row.len())?;
        let total: f64 = self.trees.iter().map(|t| t.leaf_value(row)[0]).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }
}
