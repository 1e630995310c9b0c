//! Error taxonomy shared by every module of the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {field} at row {row}, column {col}")]
    NonFiniteValue {
        field: &'static str,
        row: usize,
        col: usize,
    },

    #[error("dataset is empty ({0})")]
    EmptyDataset(&'static str),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("target is constant; cannot build bins")]
    DegenerateTarget,

    #[error("invalid bin count {0}; at least 2 bins are required")]
    InvalidK(usize),

    #[error("too few distinct target values for {requested} quantile bins ({available} usable)")]
    TooFewDistinctValues { requested: usize, available: usize },

    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: String, value: String },

    #[error("every ensemble configuration degenerated on this training set")]
    AllConfigsDegenerate,

    #[error("invalid ensemble weights: {0}")]
    InvalidWeights(String),

    #[error("quantile level {0} outside (0, 1) or not strictly increasing")]
    InvalidLevel(f64),

    #[error("insufficient calibration data: {0}")]
    InsufficientCalibration(String),

    #[error("quantile level {0} not present in curve")]
    MissingLevel(f64),

    #[error("too few samples: {n} samples cannot fill {k} folds")]
    TooFewSamples { n: usize, k: usize },

    #[error("too few points for a semivariogram: {0}")]
    TooFewPoints(usize),

    #[error("variogram fitting needs at least 3 non-empty lags, got {0}")]
    InsufficientLags(usize),

    #[error("kriging system is singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("external probabilities: {0}")]
    ExternalProbabilities(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("outer fold {outer}{}: {source}", .inner.map(|j| format!(", inner fold {j}")).unwrap_or_default())]
    Fold {
        outer: usize,
        inner: Option<usize>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn hyper(name: &str, value: impl std::fmt::Display) -> Self {
        Error::InvalidHyperparameter {
            name: name.to_string(),
            value: value.to_string(),
        }
    }

    pub(crate) fn in_fold(self, outer: usize, inner: Option<usize>) -> Self {
        match self {
            e @ Error::Fold { .. } => e,
            e => Error::Fold {
                outer,
                inner,
                source: Box::new(e),
            },
        }
    }

    /// True for failures caused by numerics rather than malformed input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::SingularSystem { .. } | Error::Solver(_) => true,
            Error::Fold { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
