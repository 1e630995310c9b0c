//! Model-agnostic predictive uncertainty through target binning.
//!
//! A regression target is discretized into bins, any probabilistic
//! classifier is trained on the bin labels, and its class probabilities are
//! read back as a discrete predictive distribution over the bin midpoints.
//! Averaging several bin configurations gives the binned uncertainty
//! ensemble. The crate also carries the comparison baselines (quantile
//! regression, split conformal prediction, quantile post-processing), CRPS
//! scoring, a nested cross-validation harness and ordinary kriging for
//! turning point predictions into raster maps.

pub mod baselines;
pub mod binning;
pub mod buee;
pub mod classifiers;
mod dataset;
pub mod error;
pub mod geostats;
pub mod metrics;
mod prediction;
pub mod rng;
pub mod synth;
pub mod validation;

pub use baselines::QuantileCurve;
pub use binning::{assign_bins, quantile_edges, uniform_edges, BinStrategy, BinStructure, BinningConfig};
pub use buee::{fit_ensemble, EnsembleModel, EnsembleSpec};
pub use classifiers::{ClassifierKind, ClassifierSpec};
pub use dataset::{validate_dataset, Dataset};
pub use error::{Error, Result};
pub use prediction::ProbabilisticPrediction;
pub use rng::SeededRng;
pub use validation::{nested_cv, CVPlan, CVReport, Forecast, HyperparameterGrid, MethodKind, MethodSpec};
