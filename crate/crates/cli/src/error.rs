use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("cannot parse '{value}' as a number at row {row}, column '{column}'")]
    Parse { row: usize, column: String, value: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("{what} version {found} is not supported (this build reads version {supported})")]
    VersionMismatch {
        what: &'static str,
        found: String,
        supported: String,
    },

    #[error("feature columns {found:?} do not match the training columns {expected:?}")]
    SchemaMismatch { expected: Vec<String>, found: Vec<String> },

    #[error("predictions have no coordinate columns {0:?}")]
    MissingCoordinates(Vec<String>),

    #[error("external probabilities at row {row} sum to {sum}")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("external probabilities: expected {expected} {what}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: binuq_core::Error,
    },
}

impl CliError {
    /// Process exit status: 1 usage or configuration, 2 data, 3 numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core { source, .. } => core_exit_code(source),
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

fn core_exit_code(e: &binuq_core::Error) -> i32 {
    use binuq_core::Error as E;
    match e {
        E::Fold { source, .. } => core_exit_code(source),
        _ if e.is_numeric() => 3,
        E::InvalidConfig(_) | E::InvalidHyperparameter { .. } | E::InvalidK(_) | E::InvalidWeights(_) | E::InvalidLevel(_) => 1,
        _ => 2,
    }
}

/// Attaches a short description of the failing step to core errors.
pub trait Context<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for binuq_core::Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: context.into(),
            source,
        })
    }
}
