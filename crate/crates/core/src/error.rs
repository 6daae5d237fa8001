use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("invalid probability vector `{name}`: {reason}")]
    InvalidProbabilities { name: &'static str, reason: String },

    #[error("density ratio undefined for subgroup {0}: reference mass is zero")]
    UndefinedRatio(usize),

    #[error("reference density underflows at x = {0:?}")]
    DensityUnderflow(Vec<f64>),

    #[error("empty data: {0}")]
    EmptyData(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("mixture component {0} collapsed (zero responsibility mass)")]
    ComponentCollapsed(usize),

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
