use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameters violate the step-size conditions: {0}")]
    Uncertified(String),

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    ProxFailed {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("prox not available: {0}")]
    ProxUnavailable(String),

    #[error("energy became non-finite at iteration {k}: {term}")]
    NonFiniteEnergy { k: usize, term: String },

    #[error("missing Hessian for term `{0}`")]
    MissingHessian(String),

    #[error("image format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
