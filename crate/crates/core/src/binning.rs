//! Target discretization.
//!
//! A continuous target is cut into `k` intervals either of equal width
//! ([`BinStrategy::Uniform`]) or holding roughly equal counts
//! ([`BinStrategy::Quantile`]). A value `y` belongs to bin `j` (1-based) when
//! `edges[j-1] < y <= edges[j]`; the minimum itself falls in bin 1 and values
//! outside the training range are clamped to the extreme bins.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinStrategy {
    Uniform,
    Quantile,
}

impl fmt::Display for BinStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinStrategy::Uniform => f.write_str("uniform"),
            BinStrategy::Quantile => f.write_str("quantile"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinningConfig {
    pub strategy: BinStrategy,
    pub k: usize,
}

impl BinningConfig {
    pub fn new(strategy: BinStrategy, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidK(k));
        }
        Ok(BinningConfig { strategy, k })
    }

    pub fn build(&self, y: &[f64]) -> Result<BinStructure> {
        match self.strategy {
            BinStrategy::Uniform => uniform_edges(y, self.k),
            BinStrategy::Quantile => quantile_edges(y, self.k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStructure {
    edges: Vec<f64>,
    midpoints: Vec<f64>,
    strategy: BinStrategy,
    requested_k: usize,
}

impl BinStructure {
    fn from_edges(edges: Vec<f64>, strategy: BinStrategy, requested_k: usize) -> Self {
        let midpoints = edges.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        BinStructure {
            edges,
            midpoints,
            strategy,
            requested_k,
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    pub fn strategy(&self) -> BinStrategy {
        self.strategy
    }

    /// Number of bins after merging duplicate edges.
    pub fn effective_k(&self) -> usize {
        self.midpoints.len()
    }

    pub fn requested_k(&self) -> usize {
        self.requested_k
    }

    pub fn width(&self, label: usize) -> f64 {
        self.edges[label] - self.edges[label - 1]
    }

    /// 1-based label of `y`.
    pub fn label(&self, y: f64) -> usize {
        // count of upper edges strictly below y
        let below = self.edges[1..].partition_point(|&e| e < y);
        (below + 1).min(self.effective_k())
    }

    pub fn midpoint(&self, label: usize) -> f64 {
        self.midpoints[label - 1]
    }
}

fn range_of(y: &[f64]) -> Result<(f64, f64)> {
    if y.is_empty() {
        return Err(Error::EmptyDataset("no target values"));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateTarget);
    }
    Ok((lo, hi))
}

/// Equal-width bins between the minimum and maximum of `y`.
pub fn uniform_edges(y: &[f64], k: usize) -> Result<BinStructure> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    let (lo, hi) = range_of(y)?;
    let delta = (hi - lo) / k as f64;
    let mut edges: Vec<f64> = (0..=k).map(|i| lo + i as f64 * delta).collect();
    edges[k] = hi;
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        // range below floating-point resolution
        return Err(Error::DegenerateTarget);
    }
    Ok(BinStructure::from_edges(edges, BinStrategy::Uniform, k))
}

/// Empirical quantile with linear interpolation between order statistics at
/// position `(n - 1) * p` of the sorted sample.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Bins at the empirical `i/k` quantiles of `y`. Repeated edges (heavy ties)
/// are merged, so the result may hold fewer than `k` bins.
pub fn quantile_edges(y: &[f64], k: usize) -> Result<BinStructure> {
    if k < 2 {
        return Err(Error::InvalidK(k));
    }
    range_of(y)?;
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() < k {
        let mut distinct = sorted.clone();
        distinct.dedup();
        return Err(Error::TooFewDistinctValues {
            requested: k,
            available: distinct.len(),
        });
    }
    let mut edges: Vec<f64> = (0..=k)
        .map(|i| empirical_quantile(&sorted, i as f64 / k as f64))
        .collect();
    edges.dedup_by(|a, b| *a <= *b);
    let effective = edges.len() - 1;
    if effective < 2 {
        return Err(Error::TooFewDistinctValues {
            requested: k,
            available: effective,
        });
    }
    Ok(BinStructure::from_edges(edges, BinStrategy::Quantile, k))
}

/// 1-based labels of every value in `y`.
pub fn assign_bins(y: &[f64], bins: &BinStructure) -> Vec<usize> {
    y.iter().map(|&v| bins.label(v)).collect()
}
