use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest drift of the total probability mass that is silently renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

// Below this drift the masses are kept bit-for-bit.
const EXACT_MASS_SLACK: f64 = 1e-12;

/// A discrete predictive distribution: atoms at `support` with masses `probs`,
/// together with its mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticPrediction {
    support: Vec<f64>,
    probs: Vec<f64>,
    mean: f64,
    std: f64,
}

impl ProbabilisticPrediction {
    /// Validates `(support, probs)` and derives the moments.
    ///
    /// Masses whose total is within [`RENORMALIZE_TOLERANCE`] of one are
    /// rescaled to sum to one; anything further off is rejected.
    pub fn new(support: Vec<f64>, mut probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                what: "probabilities",
                expected: support.len(),
                found: probs.len(),
            });
        }
        if support.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite support point".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(
                "support must be strictly increasing".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("invalid mass {p}")));
        }
        let total: f64 = probs.iter().sum();
        let drift = (total - 1.0).abs();
        if drift > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}"
            )));
        }
        if drift > EXACT_MASS_SLACK {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        let mean = weighted_mean(&support, &probs);
        let std = weighted_std(&support, &probs, mean);
        Ok(ProbabilisticPrediction {
            support,
            probs,
            mean,
            std,
        })
    }

    /// Assembles a prediction whose moments were computed by the caller
    /// (mixtures compute the mean member by member).
    pub(crate) fn from_parts(support: Vec<f64>, probs: Vec<f64>, mean: f64, std: f64) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(support.len(), probs.len());
        ProbabilisticPrediction {
            support,
            probs,
            mean,
            std,
        }
    }

    /// A point mass at `value`.
    pub fn point_mass(value: f64) -> Self {
        ProbabilisticPrediction::from_parts(vec![value], vec![1.0], value, 0.0)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }

    /// `P(X <= y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .take_while(|(m, _)| **m <= y)
            .map(|(_, p)| p)
            .sum::<f64>()
            .min(1.0)
    }

    /// Generalized inverse CDF: the smallest atom whose cumulative mass
    /// reaches `level`.
    pub fn quantile(&self, level: f64) -> f64 {
        let mut acc = 0.0;
        for (m, p) in self.support.iter().zip(&self.probs) {
            acc += p;
            // slack keeps e.g. 0.1 + 0.2 from missing level 0.3
            if *p > 0.0 && acc >= level - 1e-12 {
                return *m;
            }
        }
        // all remaining mass is zero; return the last atom carrying mass
        self.support
            .iter()
            .zip(&self.probs)
            .rev()
            .find(|(_, p)| **p > 0.0)
            .map_or(self.support[self.support.len() - 1], |(m, _)| *m)
    }
}

pub(crate) fn weighted_mean(support: &[f64], probs: &[f64]) -> f64 {
    support.iter().zip(probs).map(|(m, p)| p * m).sum()
}

pub(crate) fn weighted_std(support: &[f64], probs: &[f64], mean: f64) -> f64 {
    support
        .iter()
        .zip(probs)
        .map(|(m, p)| p * (m - mean) * (m - mean))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn one_hot_is_point_mass() {
        let p = ProbabilisticPrediction::new(vec![1.0, 3.0, 5.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.mean(), 3.0);
        assert_eq!(p.std(), 0.0);
    }

    #[test]
    fn symmetric_two_atoms() {
        let p = ProbabilisticPrediction::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(p.mean(), 1.0);
        assert_eq!(p.std(), 1.0);
    }

    #[test]
    fn three_atoms_reference_values() {
        // variance 0.2*4.84 + 0.5*0.04 + 0.3*3.24 = 1.96
        let p = ProbabilisticPrediction::new(vec![1.0, 3.0, 5.0], vec![0.2, 0.5, 0.3]).unwrap();
        assert_abs_diff_eq!(p.mean(), 3.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.std(), 1.4, epsilon = 1e-12);
    }

    #[test]
    fn small_drift_is_renormalized_large_drift_rejected() {
        let p = ProbabilisticPrediction::new(vec![0.0, 1.0], vec![0.5, 0.5 + 5e-7]).unwrap();
        assert_abs_diff_eq!(p.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(ProbabilisticPrediction::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn rejects_unsorted_support_and_negative_mass() {
        assert!(ProbabilisticPrediction::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(ProbabilisticPrediction::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn quantiles_of_discrete_distribution() {
        let p = ProbabilisticPrediction::new(vec![1.0, 2.0, 3.0], vec![0.1, 0.2, 0.7]).unwrap();
        assert_eq!(p.quantile(0.05), 1.0);
        assert_eq!(p.quantile(0.1), 1.0);
        assert_eq!(p.quantile(0.3), 2.0);
        assert_eq!(p.quantile(0.31), 3.0);
        assert_eq!(p.quantile(0.95), 3.0);
        assert_abs_diff_eq!(p.cdf(2.5), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn quantile_skips_zero_mass_atoms() {
        let p = ProbabilisticPrediction::new(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.quantile(0.01), 2.0);
        assert_eq!(p.quantile(0.99), 2.0);
    }

    proptest! {
        #[test]
        fn stored_moments_match_recomputation(
            raw in proptest::collection::vec((0.0f64..1.0, -50.0f64..50.0), 1..10)
        ) {
            let mut support: Vec<f64> = raw.iter().map(|r| r.1).collect();
            support.sort_by(f64::total_cmp);
            support.dedup();
            let w: Vec<f64> = raw.iter().take(support.len()).map(|r| r.0 + 1e-3).collect();
            let total: f64 = w.iter().sum();
            let probs: Vec<f64> = w.iter().map(|v| v / total).collect();
            let p = ProbabilisticPrediction::new(support.clone(), probs).unwrap();
            let mean: f64 = support.iter().zip(p.probs()).map(|(m, q)| m * q).sum();
            let var: f64 = support.iter().zip(p.probs()).map(|(m, q)| q * (m - mean).powi(2)).sum();
            prop_assert!((p.mean() - mean).abs() <= 1e-12);
            prop_assert!((p.std() - var.sqrt()).abs() <= 1e-12);
            prop_assert!(p.std() >= 0.0);
        }
    }
}
