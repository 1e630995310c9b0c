//! Probabilistic multi-class classifiers behind one interface.
//!
//! Every backend returns exactly `n_classes` probability columns, in label
//! order, regardless of which labels occurred in the training data.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub mod forest;
pub mod softmax;
mod tree;

pub use forest::{MaxFeatures, RandomForestClassifier, RandomForestParams, RandomForestRegressor};
pub use softmax::{SoftmaxClassifier, SoftmaxParams};
pub use tree::DecisionTree;

/// A single hyperparameter value as it appears in a search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl HyperValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            HyperValue::Int(v) => Some(*v as f64),
            HyperValue::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            HyperValue::Int(v) => Some(*v),
            HyperValue::Float(v) if v.fract() == 0.0 => Some(*v as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            HyperValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Bool(v) => write!(f, "{v}"),
            HyperValue::Int(v) => write!(f, "{v}"),
            HyperValue::Float(v) => write!(f, "{v:?}"),
            HyperValue::Str(v) => write!(f, "'{v}'"),
        }
    }
}

impl From<i64> for HyperValue {
    fn from(v: i64) -> Self {
        HyperValue::Int(v)
    }
}

impl From<f64> for HyperValue {
    fn from(v: f64) -> Self {
        HyperValue::Float(v)
    }
}

impl From<bool> for HyperValue {
    fn from(v: bool) -> Self {
        HyperValue::Bool(v)
    }
}

impl From<&str> for HyperValue {
    fn from(v: &str) -> Self {
        HyperValue::Str(v.to_string())
    }
}

/// One point of a hyperparameter grid, keyed by dimension name.
pub type Hyperparams = BTreeMap<String, HyperValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    RandomForest,
    Softmax,
    /// Probabilities are produced by an outside tool and attached later.
    External,
}

impl ClassifierKind {
    pub fn grid_dimensions(self) -> &'static [&'static str] {
        match self {
            ClassifierKind::RandomForest => &forest::GRID_DIMENSIONS,
            ClassifierKind::Softmax => &softmax::GRID_DIMENSIONS,
            ClassifierKind::External => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub hyperparams: Hyperparams,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, hyperparams: Hyperparams) -> Result<Self> {
        let spec = ClassifierSpec { kind, hyperparams };
        spec.validate()?;
        Ok(spec)
    }

    pub fn random_forest() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::RandomForest,
            hyperparams: Hyperparams::new(),
        }
    }

    pub fn softmax() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Softmax,
            hyperparams: Hyperparams::new(),
        }
    }

    pub fn external() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::External,
            hyperparams: Hyperparams::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ClassifierKind::RandomForest => RandomForestParams::from_hyperparams(&self.hyperparams).map(drop),
            ClassifierKind::Softmax => SoftmaxParams::from_hyperparams(&self.hyperparams).map(drop),
            ClassifierKind::External => match self.hyperparams.iter().next() {
                Some((k, v)) => Err(Error::hyper(k, v)),
                None => Ok(()),
            },
        }
    }

    /// Fits on 1-based `labels` drawn from `1..=n_classes`.
    pub fn fit(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
        n_classes: usize,
        rng: &SeededRng,
    ) -> Result<FittedClassifier> {
        match self.kind {
            ClassifierKind::RandomForest => {
                let params = RandomForestParams::from_hyperparams(&self.hyperparams)?;
                RandomForestClassifier::fit(x, labels, n_classes, &params, rng).map(FittedClassifier::RandomForest)
            }
            ClassifierKind::Softmax => {
                let params = SoftmaxParams::from_hyperparams(&self.hyperparams)?;
                SoftmaxClassifier::fit(x, labels, n_classes, &params).map(FittedClassifier::Softmax)
            }
            ClassifierKind::External => {
                zero_based_labels(x.nrows(), labels, n_classes)?;
                Ok(FittedClassifier::External(ExternalClassifier {
                    n_classes,
                    n_features: x.ncols(),
                    probabilities: None,
                }))
            }
        }
    }
}

/// Placeholder for a classifier trained outside this crate; its predictions
/// are supplied as a probability matrix aligned with the rows to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalClassifier {
    n_classes: usize,
    n_features: usize,
    #[serde(skip)]
    probabilities: Option<Array2<f64>>,
}

impl ExternalClassifier {
    /// Attaches an `m x n_classes` probability matrix. Rows must be
    /// nonnegative and sum to one within 1e-6; they are renormalized.
    pub fn attach(&mut self, mut probabilities: Array2<f64>) -> Result<()> {
        if probabilities.ncols() != self.n_classes {
            return Err(Error::DimensionMismatch {
                what: "external probability columns",
                expected: self.n_classes,
                found: probabilities.ncols(),
            });
        }
        for (i, mut row) in probabilities.rows_mut().into_iter().enumerate() {
            let total = row.sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-6 {
                return Err(Error::ExternalProbabilities(format!("row {i} sums to {total}")));
            }
            row /= total;
        }
        self.probabilities = Some(probabilities);
        Ok(())
    }

    pub fn detach(&mut self) {
        self.probabilities = None;
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "feature columns",
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        let p = self
            .probabilities
            .as_ref()
            .ok_or_else(|| Error::ExternalProbabilities("no probabilities attached".into()))?;
        if p.nrows() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "external probability rows",
                expected: x.nrows(),
                found: p.nrows(),
            });
        }
        Ok(p.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedClassifier {
    RandomForest(RandomForestClassifier),
    Softmax(SoftmaxClassifier),
    External(ExternalClassifier),
}

impl FittedClassifier {
    pub fn n_classes(&self) -> usize {
        match self {
            FittedClassifier::RandomForest(m) => m.n_classes(),
            FittedClassifier::Softmax(m) => m.n_classes(),
            FittedClassifier::External(m) => m.n_classes,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            FittedClassifier::RandomForest(m) => m.n_features(),
            FittedClassifier::Softmax(m) => m.n_features(),
            FittedClassifier::External(m) => m.n_features,
        }
    }

    /// `m x n_classes` matrix of class probabilities; an empty input yields
    /// an empty `0 x n_classes` matrix.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            FittedClassifier::RandomForest(m) => m.predict_proba(x),
            FittedClassifier::Softmax(m) => m.predict_proba(x),
            FittedClassifier::External(m) => m.predict_proba(x),
        }
    }

    pub fn as_external_mut(&mut self) -> Option<&mut ExternalClassifier> {
        match self {
            FittedClassifier::External(m) => Some(m),
            _ => None,
        }
    }
}

pub(crate) fn zero_based_labels(n: usize, labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    if n_classes == 0 {
        return Err(Error::InvalidK(0));
    }
    labels
        .iter()
        .map(|&l| {
            if (1..=n_classes).contains(&l) {
                Ok(l - 1)
            } else {
                Err(Error::InvalidConfig(format!("label {l} outside 1..={n_classes}")))
            }
        })
        .collect()
}
