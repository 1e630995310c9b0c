//! Split conformal intervals around a point predictor and quantile-regression
//! post-processing of its output.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::curve::QuantileCurve;
use super::quantreg::{QrParams, QuantileRegression};
use crate::classifiers::RandomForestRegressor;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Minimum calibration rows for post-processing.
pub const MIN_POSTPROCESS_CALIBRATION: usize = 10;

/// Default miscoverage grid `0.1, 0.2, ..., 0.9`.
pub fn miscoverage_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// A model producing one real-valued prediction per row.
pub trait PointPredictor {
    fn n_features(&self) -> usize;
    fn predict_point(&self, row: ArrayView1<f64>) -> Result<f64>;
}

impl PointPredictor for RandomForestRegressor {
    fn n_features(&self) -> usize {
        RandomForestRegressor::n_features(self)
    }

    fn predict_point(&self, row: ArrayView1<f64>) -> Result<f64> {
        self.predict_row(row)
    }
}

fn check_row(expected: usize, row: ArrayView1<f64>) -> Result<()> {
    if row.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "feature columns",
            expected,
            found: row.len(),
        });
    }
    Ok(())
}

// Levels derived from miscoverage values are rounded to nine decimals so that
// `0.1 / 2` and `1 - 0.1 / 2` land exactly on the literals 0.05 and 0.95.
fn snap_level(level: f64) -> f64 {
    (level * 1e9).round() / 1e9
}

/// The calibration quantile `s_(ceil((n + 1)(1 - alpha)))` of ascending
/// `sorted_scores`.
pub fn conformal_quantile(sorted_scores: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidLevel(alpha));
    }
    let n = sorted_scores.len();
    // the small offset keeps exact products such as 5 * 0.8 from rounding up
    let rank = (((n + 1) as f64) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize;
    if rank > n {
        return Err(Error::InsufficientCalibration(format!(
            "miscoverage {alpha} needs rank {rank} but only {n} calibration scores"
        )));
    }
    Ok(sorted_scores[rank - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalModel<P> {
    base: P,
    scores: Vec<f64>,
    alphas: Vec<f64>,
    half_widths: Vec<f64>,
}

pub fn split_conformal_calibrate<P: PointPredictor>(base: P, calib: &Dataset, alphas: &[f64]) -> Result<ConformalModel<P>> {
    ConformalModel::calibrate(base, calib.features(), calib.target(), alphas)
}

impl<P: PointPredictor> ConformalModel<P> {
    pub fn calibrate(base: P, x: ArrayView2<f64>, y: ArrayView1<f64>, alphas: &[f64]) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "calibration targets",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        let mut scores = x
            .rows()
            .into_iter()
            .zip(y)
            .map(|(row, yi)| Ok((yi - base.predict_point(row)?).abs()))
            .collect::<Result<Vec<f64>>>()?;
        scores.sort_by(f64::total_cmp);
        let mut alphas = alphas.to_vec();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let half_widths = alphas
            .iter()
            .map(|&a| conformal_quantile(&scores, a))
            .collect::<Result<_>>()?;
        Ok(ConformalModel {
            base,
            scores,
            alphas,
            half_widths,
        })
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    /// Absolute calibration residuals, ascending.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn half_width(&self, alpha: f64) -> Option<f64> {
        self.alphas
            .iter()
            .position(|a| (a - alpha).abs() <= 1e-12)
            .map(|i| self.half_widths[i])
    }

    /// Nested symmetric intervals `yhat +- q(alpha)` placed at levels
    /// `alpha / 2` and `1 - alpha / 2`, plus `yhat` at the median.
    pub fn predict(&self, row: ArrayView1<f64>) -> Result<QuantileCurve> {
        check_row(self.base.n_features(), row)?;
        let yhat = self.base.predict_point(row)?;
        let mut points = Vec::with_capacity(2 * self.alphas.len() + 1);
        for (&a, &q) in self.alphas.iter().zip(&self.half_widths) {
            points.push((snap_level(a / 2.0), yhat - q));
            points.push((snap_level(1.0 - a / 2.0), yhat + q));
        }
        if !points.iter().any(|p| p.0 == 0.5) {
            points.push((0.5, yhat));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (levels, values) = points.into_iter().unzip();
        QuantileCurve::new(levels, values)
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<QuantileCurve>> {
        x.rows().into_iter().map(|row| self.predict(row)).collect()
    }
}

/// Per-level linear quantile regression of the target on the base model's
/// point prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrPostProcess<P> {
    base: P,
    qr: QuantileRegression,
}

pub fn qr_postprocess_fit<P: PointPredictor>(
    base: P,
    calib: &Dataset,
    levels: &[f64],
    alpha: f64,
) -> Result<QrPostProcess<P>> {
    QrPostProcess::fit(base, calib.features(), calib.target(), levels, alpha)
}

impl<P: PointPredictor> QrPostProcess<P> {
    pub fn fit(base: P, x: ArrayView2<f64>, y: ArrayView1<f64>, levels: &[f64], alpha: f64) -> Result<Self> {
        if x.nrows() < MIN_POSTPROCESS_CALIBRATION {
            return Err(Error::InsufficientCalibration(format!(
                "post-processing needs at least {MIN_POSTPROCESS_CALIBRATION} calibration rows, got {}",
                x.nrows()
            )));
        }
        let yhat = x
            .rows()
            .into_iter()
            .map(|row| base.predict_point(row))
            .collect::<Result<Vec<f64>>>()?;
        let design = Array2::from_shape_vec((yhat.len(), 1), yhat).expect("one column");
        let params = QrParams {
            alpha,
            fit_intercept: true,
        };
        let qr = QuantileRegression::fit(design.view(), y, levels, params)?;
        Ok(QrPostProcess { base, qr })
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn regression(&self) -> &QuantileRegression {
        &self.qr
    }

    pub fn predict(&self, row: ArrayView1<f64>) -> Result<QuantileCurve> {
        check_row(self.base.n_features(), row)?;
        let yhat = [self.base.predict_point(row)?];
        self.qr.predict(ArrayView1::from(&yhat))
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<QuantileCurve>> {
        x.rows().into_iter().map(|row| self.predict(row)).collect()
    }
}
