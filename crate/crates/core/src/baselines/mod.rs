//! Comparison methods that emit quantile curves instead of discrete
//! distributions.

mod conformal;
mod curve;
pub mod quantreg;

pub use conformal::{
    conformal_quantile, miscoverage_grid, qr_postprocess_fit, split_conformal_calibrate, ConformalModel,
    PointPredictor, QrPostProcess, MIN_POSTPROCESS_CALIBRATION,
};
pub use curve::{standard_levels, QuantileCurve, STANDARD_LEVEL_COUNT};
pub use quantreg::{fit_pinball, fit_quantile_regression, LinearQuantile, QrParams, QuantileRegression};
