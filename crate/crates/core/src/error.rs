use std::path::PathBuf;

/// Errors raised across the crate.
///
/// Variants fall in two groups: validation failures (bad input, broken
/// preconditions) and runtime failures (numerical breakdown during training
/// or fitting). The CLI maps them to exit codes 1 and 2 respectively.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    DimensionMismatch {
        expected: usize,
        found: usize,
        line: Option<usize>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidConfig(String),

    #[error("dataset is already symmetrized")]
    AlreadySymmetrized,

    #[error("calibration metrics require a symmetrized prediction set")]
    NotSymmetrized,

    #[error("ranking score undefined: alpha = 0 with T = {t} and F = {f}")]
    UndefinedScore { t: f64, f: f64 },

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("MAP fit did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures caused by the input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Diverged { .. } | Error::NotConverged { .. } | Error::NotPositiveDefinite
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
