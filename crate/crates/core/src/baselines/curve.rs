use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of levels in the standard grid `0.05, 0.10, ..., 0.95`.
pub const STANDARD_LEVEL_COUNT: usize = 19;

/// `0.05, 0.10, ..., 0.95`, each computed as `i / 20`.
pub fn standard_levels() -> Vec<f64> {
    (1..=STANDARD_LEVEL_COUNT).map(|i| i as f64 / 20.0).collect()
}

pub(crate) fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidConfig("empty quantile level grid".into()));
    }
    for (i, &l) in levels.iter().enumerate() {
        if !(l > 0.0 && l < 1.0) || (i > 0 && l <= levels[i - 1]) {
            return Err(Error::InvalidLevel(l));
        }
    }
    Ok(())
}

/// Nondecreasing map from quantile levels to target values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    levels: Vec<f64>,
    values: Vec<f64>,
}

impl QuantileCurve {
    /// Builds a curve, sorting `values` ascending so that quantiles never
    /// cross.
    pub fn new(levels: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        validate_levels(&levels)?;
        if values.len() != levels.len() {
            return Err(Error::DimensionMismatch {
                what: "quantile values",
                expected: levels.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite quantile value".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(QuantileCurve { levels, values })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Value at a level of the grid (matched within 1e-9).
    pub fn value_at(&self, level: f64) -> Option<f64> {
        self.levels
            .iter()
            .position(|l| (l - level).abs() <= 1e-9)
            .map(|i| self.values[i])
    }

    /// Level-wise mean of curves sharing one grid, then rearranged.
    pub fn vincentize(curves: &[QuantileCurve]) -> Result<QuantileCurve> {
        let first = curves
            .first()
            .ok_or_else(|| Error::InvalidConfig("no curves to average".into()))?;
        if curves.iter().any(|c| c.levels != first.levels) {
            return Err(Error::InvalidConfig("curves use different level grids".into()));
        }
        let n = curves.len() as f64;
        let values = (0..first.len())
            .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / n)
            .collect();
        QuantileCurve::new(first.levels.clone(), values)
    }
}
