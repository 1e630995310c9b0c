//! The regression-to-classification adapter and the binned uncertainty
//! estimation ensemble.
//!
//! An adapter bins the training target, fits a classifier on the bin labels
//! and reads class probabilities back as a discrete distribution over the bin
//! midpoints: the predictive mean is `sum_k p_k m_k` and the uncertainty is
//! the standard deviation `sqrt(sum_k p_k (m_k - mean)^2)`.
//!
//! The ensemble fits one adapter per bin configuration and mixes their
//! distributions with weights `w_b`. The ensemble mean is
//! `sum_b w_b sum_k p_k^b m_k^b`; its spread is the standard deviation of the
//! full mixture about that mean.

use ndarray::{ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{assign_bins, BinStrategy, BinStructure, BinningConfig};
use crate::classifiers::{ClassifierSpec, FittedClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::prediction::ProbabilisticPrediction;
use crate::rng::{tags, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedAdapterModel {
    bins: BinStructure,
    classifier: FittedClassifier,
}

pub fn fit_binned_adapter(
    train: &Dataset,
    config: BinningConfig,
    spec: &ClassifierSpec,
    rng: &SeededRng,
) -> Result<BinnedAdapterModel> {
    let y = train.target().to_vec();
    let bins = config.build(&y)?;
    let labels = assign_bins(&y, &bins);
    let classifier = spec.fit(train.features(), &labels, bins.effective_k(), rng)?;
    Ok(BinnedAdapterModel { bins, classifier })
}

impl BinnedAdapterModel {
    pub fn new(bins: BinStructure, classifier: FittedClassifier) -> Result<Self> {
        if classifier.n_classes() != bins.effective_k() {
            return Err(Error::DimensionMismatch {
                what: "classifier classes",
                expected: bins.effective_k(),
                found: classifier.n_classes(),
            });
        }
        Ok(BinnedAdapterModel { bins, classifier })
    }

    pub fn bins(&self) -> &BinStructure {
        &self.bins
    }

    pub fn classifier(&self) -> &FittedClassifier {
        &self.classifier
    }

    pub fn classifier_mut(&mut self) -> &mut FittedClassifier {
        &mut self.classifier
    }

    pub fn n_features(&self) -> usize {
        self.classifier.n_features()
    }

    /// Distribution over the bin midpoints for one row of class probabilities.
    pub fn distribution_from_proba(&self, probs: &[f64]) -> Result<ProbabilisticPrediction> {
        ProbabilisticPrediction::new(self.bins.midpoints().to_vec(), probs.to_vec())
    }

    pub fn predict_distribution(&self, x: ArrayView1<f64>) -> Result<ProbabilisticPrediction> {
        let row = x.insert_axis(Axis(0));
        let mut out = self.predict_batch(row)?;
        Ok(out.remove(0))
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<ProbabilisticPrediction>> {
        let proba = self.classifier.predict_proba(x)?;
        proba
            .rows()
            .into_iter()
            .map(|row| self.distribution_from_proba(row.as_slice().expect("standard layout")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    configs: Vec<BinningConfig>,
    weights: Vec<f64>,
}

impl EnsembleSpec {
    pub fn new(configs: Vec<BinningConfig>, weights: Vec<f64>) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::InvalidWeights("at least one bin configuration is required".into()));
        }
        if configs.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} configurations but {} weights",
                configs.len(),
                weights.len()
            )));
        }
        if let Some(c) = configs.iter().find(|c| c.k < 2) {
            return Err(Error::InvalidK(c.k));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(EnsembleSpec { configs, weights })
    }

    pub fn uniform(configs: Vec<BinningConfig>) -> Result<Self> {
        let b = configs.len().max(1);
        EnsembleSpec::new(configs, vec![1.0 / b as f64; b])
    }

    pub fn single(config: BinningConfig) -> Self {
        EnsembleSpec {
            configs: vec![config],
            weights: vec![1.0],
        }
    }

    pub fn configs(&self) -> &[BinningConfig] {
        &self.configs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for EnsembleSpec {
    /// Uniform and quantile binning at 5, 10, 15 and 20 bins, equal weights.
    fn default() -> Self {
        let configs = [BinStrategy::Uniform, BinStrategy::Quantile]
            .into_iter()
            .flat_map(|strategy| [5, 10, 15, 20].map(|k| BinningConfig { strategy, k }))
            .collect();
        EnsembleSpec::uniform(configs).expect("static configuration is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    members: Vec<BinnedAdapterModel>,
    weights: Vec<f64>,
    /// Configurations skipped because the training target had too few
    /// distinct values for them.
    dropped: Vec<BinningConfig>,
}

/// Fits one adapter per configuration, each on its own random stream.
/// Configurations that cannot be built on this target (too few distinct
/// values) are dropped and the remaining weights rescaled.
pub fn fit_ensemble(
    train: &Dataset,
    spec: &EnsembleSpec,
    classifier: &ClassifierSpec,
    rng: &SeededRng,
) -> Result<EnsembleModel> {
    let member_stream = rng.derive(tags::MEMBER);
    let fitted: Vec<Result<BinnedAdapterModel>> = spec
        .configs
        .par_iter()
        .enumerate()
        .map(|(b, config)| fit_binned_adapter(train, *config, classifier, &member_stream.derive(b as u64)))
        .collect();

    let mut members = Vec::new();
    let mut weights = Vec::new();
    let mut dropped = Vec::new();
    for ((fit, config), w) in fitted.into_iter().zip(&spec.configs).zip(&spec.weights) {
        match fit {
            Ok(m) => {
                members.push(m);
                weights.push(*w);
            }
            Err(Error::TooFewDistinctValues { .. }) => dropped.push(*config),
            Err(e) => return Err(e),
        }
    }
    let total: f64 = weights.iter().sum();
    if members.is_empty() || total <= 0.0 {
        return Err(Error::AllConfigsDegenerate);
    }
    if !dropped.is_empty() {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(EnsembleModel {
        members,
        weights,
        dropped,
    })
}

impl EnsembleModel {
    pub fn new(members: Vec<BinnedAdapterModel>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() || members.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} members but {} weights",
                members.len(),
                weights.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(EnsembleModel {
            members,
            weights,
            dropped: Vec::new(),
        })
    }

    pub fn members(&self) -> &[BinnedAdapterModel] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [BinnedAdapterModel] {
        &mut self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dropped(&self) -> &[BinningConfig] {
        &self.dropped
    }

    pub fn n_features(&self) -> usize {
        self.members[0].n_features()
    }

    pub fn predict_ensemble(&self, x: ArrayView1<f64>) -> Result<ProbabilisticPrediction> {
        let parts = self
            .members
            .iter()
            .map(|m| m.predict_distribution(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(mixture(&self.weights, &parts))
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<ProbabilisticPrediction>> {
        let per_member = self
            .members
            .iter()
            .map(|m| m.predict_batch(x))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..x.nrows())
            .map(|i| {
                let parts: Vec<ProbabilisticPrediction> = per_member.iter().map(|p| p[i].clone()).collect();
                mixture(&self.weights, &parts)
            })
            .collect())
    }
}

/// Finite mixture of discrete distributions. Atoms at identical support
/// values are merged; the mean is `sum_b w_b mean_b` and the spread is the
/// mixture standard deviation about it.
pub fn mixture(weights: &[f64], parts: &[ProbabilisticPrediction]) -> ProbabilisticPrediction {
    assert_eq!(weights.len(), parts.len());
    assert!(!parts.is_empty());
    let mean: f64 = weights.iter().zip(parts).map(|(w, p)| w * p.mean()).sum();
    let second: f64 = weights
        .iter()
        .zip(parts)
        .map(|(w, p)| {
            w * p
                .support()
                .iter()
                .zip(p.probs())
                .map(|(m, q)| q * (m - mean) * (m - mean))
                .sum::<f64>()
        })
        .sum();

    let mut atoms: Vec<(f64, f64)> = weights
        .iter()
        .zip(parts)
        .flat_map(|(w, p)| p.support().iter().zip(p.probs()).map(move |(m, q)| (*m, w * q)))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut support: Vec<f64> = Vec::with_capacity(atoms.len());
    let mut probs: Vec<f64> = Vec::with_capacity(atoms.len());
    for (m, q) in atoms {
        if support.last() == Some(&m) {
            *probs.last_mut().expect("nonempty") += q;
        } else {
            support.push(m);
            probs.push(q);
        }
    }
    ProbabilisticPrediction::from_parts(support, probs, mean, second.sqrt())
}
