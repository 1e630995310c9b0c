//! Probabilistic scoring.
//!
//! Two CRPS paths exist because the methods emit different representations:
//! discrete distributions are scored exactly, quantile curves through a
//! pinball-loss quadrature. Reports name the path that produced a score.

use serde::{Deserialize, Serialize};

use crate::baselines::QuantileCurve;
use crate::error::{Error, Result};
use crate::prediction::ProbabilisticPrediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrpsPath {
    /// Closed form for discrete distributions.
    Discrete,
    /// Pinball-loss quadrature over a quantile grid.
    Quantile,
}

/// Pinball loss `rho_tau(u)`: `tau * u` for `u >= 0`, `(tau - 1) * u` otherwise.
pub fn pinball_loss(tau: f64, u: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// Exact CRPS of a discrete distribution through the energy form
/// `E|X - y| - E|X - X'| / 2`.
pub fn crps_discrete(pred: &ProbabilisticPrediction, y: f64) -> f64 {
    let m = pred.support();
    let p = pred.probs();
    let spread_to_obs: f64 = m.iter().zip(p).map(|(mk, pk)| pk * (mk - y).abs()).sum();
    let mut self_spread = 0.0;
    for k in 0..m.len() {
        for l in 0..m.len() {
            self_spread += p[k] * p[l] * (m[k] - m[l]).abs();
        }
    }
    (spread_to_obs - 0.5 * self_spread).max(0.0)
}

/// Quadrature weights for a level grid: each level owns the interval between
/// the midpoints to its neighbours, and the outermost levels extend by half
/// their neighbour spacing (clipped to `[0, 1]`). A single level owns the
/// whole unit interval.
pub fn quadrature_weights(levels: &[f64]) -> Vec<f64> {
    let l = levels.len();
    if l == 1 {
        return vec![1.0];
    }
    let mut bounds = Vec::with_capacity(l + 1);
    bounds.push((levels[0] - (levels[1] - levels[0]) / 2.0).max(0.0));
    for w in levels.windows(2) {
        bounds.push((w[0] + w[1]) / 2.0);
    }
    bounds.push((levels[l - 1] + (levels[l - 1] - levels[l - 2]) / 2.0).min(1.0));
    bounds.windows(2).map(|b| b[1] - b[0]).collect()
}

/// CRPS approximated from quantiles: `2 * sum_l w_l * rho_{tau_l}(y - q_l)`
/// with [`quadrature_weights`]. Converges to the exact CRPS of a continuous
/// distribution as the grid is refined.
pub fn crps_from_quantiles(curve: &QuantileCurve, y: f64) -> f64 {
    let weights = quadrature_weights(curve.levels());
    2.0 * curve
        .levels()
        .iter()
        .zip(curve.values())
        .zip(&weights)
        .map(|((tau, q), w)| w * pinball_loss(*tau, y - q))
        .sum::<f64>()
}

/// Fraction of observations inside `[value(lower), value(upper)]`.
pub fn empirical_coverage(curves: &[QuantileCurve], ys: &[f64], lower: f64, upper: f64) -> Result<f64> {
    if curves.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "observations",
            expected: curves.len(),
            found: ys.len(),
        });
    }
    if curves.is_empty() {
        return Err(Error::EmptyDataset("no observations"));
    }
    let mut inside = 0usize;
    for (c, &y) in curves.iter().zip(ys) {
        let lo = c.value_at(lower).ok_or(Error::MissingLevel(lower))?;
        let hi = c.value_at(upper).ok_or(Error::MissingLevel(upper))?;
        if lo <= y && y <= hi {
            inside += 1;
        }
    }
    Ok(inside as f64 / ys.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub method_tag: String,
    pub path: CrpsPath,
    pub n: usize,
    pub mean_crps: f64,
    pub per_sample_crps: Vec<f64>,
}

impl ScoreReport {
    pub fn new(method_tag: impl Into<String>, path: CrpsPath, per_sample_crps: Vec<f64>) -> Self {
        let n = per_sample_crps.len();
        let mean_crps = mean(&per_sample_crps);
        ScoreReport {
            method_tag: method_tag.into(),
            path,
            n,
            mean_crps,
            per_sample_crps,
        }
    }

    pub fn discrete(method_tag: impl Into<String>, preds: &[ProbabilisticPrediction], ys: &[f64]) -> Self {
        let scores = preds.iter().zip(ys).map(|(p, y)| crps_discrete(p, *y)).collect();
        ScoreReport::new(method_tag, CrpsPath::Discrete, scores)
    }

    pub fn quantile(method_tag: impl Into<String>, curves: &[QuantileCurve], ys: &[f64]) -> Self {
        let scores = curves.iter().zip(ys).map(|(c, y)| crps_from_quantiles(c, *y)).collect();
        ScoreReport::new(method_tag, CrpsPath::Quantile, scores)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::standard_levels;
    use crate::rng::SeededRng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};

    fn dist(support: &[f64], probs: &[f64]) -> ProbabilisticPrediction {
        ProbabilisticPrediction::new(support.to_vec(), probs.to_vec()).unwrap()
    }

    fn gaussian_crps(y: f64) -> f64 {
        let n = Normal::new(0.0, 1.0).unwrap();
        y * (2.0 * n.cdf(y) - 1.0) + 2.0 * n.pdf(y) - 1.0 / std::f64::consts::PI.sqrt()
    }

    fn gaussian_curve() -> QuantileCurve {
        let n = Normal::new(0.0, 1.0).unwrap();
        let levels = standard_levels();
        let values = levels.iter().map(|p| n.inverse_cdf(*p)).collect();
        QuantileCurve::new(levels, values).unwrap()
    }

    // CRPS as the integral of (F(t) - 1{t >= y})^2, integrated exactly over
    // the piecewise-constant segments of the step functions
    fn crps_by_integration(pred: &ProbabilisticPrediction, y: f64) -> f64 {
        let mut knots: Vec<f64> = pred.support().to_vec();
        knots.push(y);
        knots.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in knots.windows(2) {
            let mid = (w[0] + w[1]) / 2.0;
            let f = pred.cdf(mid);
            let h = if mid >= y { 1.0 } else { 0.0 };
            total += (f - h).powi(2) * (w[1] - w[0]);
        }
        total
    }

    #[test]
    fn point_mass_is_absolute_error() {
        assert_eq!(crps_discrete(&ProbabilisticPrediction::point_mass(2.0), 5.0), 3.0);
    }

    #[test]
    fn two_atom_reference() {
        let p = dist(&[0.0, 1.0], &[0.5, 0.5]);
        assert_abs_diff_eq!(crps_discrete(&p, 1.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(crps_discrete(&p, 0.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn two_atom_monte_carlo() {
        let p = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let mut gen = SeededRng::new(17).generator();
        let n = 1_000_000;
        let mut abs_obs = 0.0;
        let mut abs_pair = 0.0;
        for _ in 0..n {
            let a = p.quantile(gen.random::<f64>());
            let b = p.quantile(gen.random::<f64>());
            abs_obs += (a - 1.0f64).abs();
            abs_pair += (a - b).abs();
        }
        let mc = abs_obs / n as f64 - 0.5 * abs_pair / n as f64;
        assert!((mc - 0.25).abs() < 1e-2);
    }

    #[test]
    fn single_level_quantile_crps() {
        let c = QuantileCurve::new(vec![0.5], vec![0.0]).unwrap();
        assert_eq!(crps_from_quantiles(&c, 2.0), 2.0);
    }

    #[test]
    fn perfect_quantile_forecast_scores_zero() {
        let c = QuantileCurve::new(standard_levels(), vec![4.2; 19]).unwrap();
        assert_eq!(crps_from_quantiles(&c, 4.2), 0.0);
    }

    #[test]
    fn gaussian_curve_at_center() {
        let v = crps_from_quantiles(&gaussian_curve(), 0.0);
        assert!((v - gaussian_crps(0.0)).abs() < 0.02, "{v}");
    }

    #[test]
    fn gaussian_curve_relative_error() {
        let curve = gaussian_curve();
        for y in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let exact = gaussian_crps(y);
            let approx = crps_from_quantiles(&curve, y);
            assert!(((approx - exact) / exact).abs() < 0.02, "y={y}: {approx} vs {exact}");
        }
    }

    #[test]
    fn standard_grid_weights() {
        let w = quadrature_weights(&standard_levels());
        assert!(w.iter().all(|v| (v - 0.05).abs() < 1e-12));
        let w = quadrature_weights(&[0.1, 0.9]);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn coverage_saturates() {
        let curves: Vec<_> = (0..4)
            .map(|_| QuantileCurve::new(vec![0.05, 0.95], vec![-1.0, 1.0]).unwrap())
            .collect();
        assert_eq!(empirical_coverage(&curves, &[0.0, 0.5, -1.0, 1.0], 0.05, 0.95).unwrap(), 1.0);
        assert_eq!(empirical_coverage(&curves, &[2.0, -3.0, 1.5, 9.0], 0.05, 0.95).unwrap(), 0.0);
        assert_eq!(
            empirical_coverage(&curves, &[0.0; 4], 0.1, 0.95).unwrap_err(),
            Error::MissingLevel(0.1)
        );
    }

    #[test]
    fn score_report_mean() {
        let r = ScoreReport::new("m", CrpsPath::Discrete, vec![1.0, 2.0, 4.0]);
        assert_eq!(r.n, 3);
        assert_abs_diff_eq!(r.mean_crps, 7.0 / 3.0, epsilon = 1e-15);
    }

    fn arb_distribution() -> impl Strategy<Value = ProbabilisticPrediction> {
        proptest::collection::vec((0.01f64..1.0, -10.0f64..10.0), 1..10).prop_map(|raw| {
            let mut support: Vec<f64> = raw.iter().map(|r| r.1).collect();
            support.sort_by(f64::total_cmp);
            support.dedup();
            let w: Vec<f64> = raw.iter().take(support.len()).map(|r| r.0).collect();
            let total: f64 = w.iter().sum();
            ProbabilisticPrediction::new(support, w.iter().map(|v| v / total).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn energy_form_matches_cdf_integral(p in arb_distribution(), y in -12.0f64..12.0) {
            let a = crps_discrete(&p, y);
            let b = crps_by_integration(&p, y);
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }

        #[test]
        fn translation_and_scaling(p in arb_distribution(), y in -12.0f64..12.0, c in -5.0f64..5.0, lambda in 0.1f64..10.0) {
            let base = crps_discrete(&p, y);
            let shifted = ProbabilisticPrediction::new(
                p.support().iter().map(|m| m + c).collect(), p.probs().to_vec()).unwrap();
            prop_assert!((crps_discrete(&shifted, y + c) - base).abs() <= 1e-12 * base.max(1.0) * 20.0);
            let scaled = ProbabilisticPrediction::new(
                p.support().iter().map(|m| m * lambda).collect(), p.probs().to_vec()).unwrap();
            prop_assert!((crps_discrete(&scaled, y * lambda) - lambda * base).abs() <= 1e-12 * (lambda * base).max(1.0) * 20.0);
        }

        #[test]
        fn zero_only_for_point_mass_at_observation(p in arb_distribution()) {
            let y = p.support()[0];
            let score = crps_discrete(&p, y);
            if p.support().len() == 1 {
                prop_assert_eq!(score, 0.0);
            } else {
                prop_assert!(score > 0.0);
            }
        }
    }
}
