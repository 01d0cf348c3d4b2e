use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation (bad control index,
    /// wrong observation kind, non-PSD covariance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or scenario failed validation on construction or load.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Every likelihood vanished at the observed measurement, so the
    /// filter normaliser is zero.
    #[error("degenerate measurement: all likelihoods are zero (normaliser {0:e})")]
    DegenerateMeasurement(f64),

    /// Two quantities that must agree (a joint table and its marginal, a
    /// policy artifact and a scenario) do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Sequence lengths or ranges that do not line up.
    #[error("input error: {0}")]
    Input(String),

    /// A size guard refused an instance that would be too large to enumerate
    /// or store.
    #[error("size guard exceeded: {what} needs {count} entries, limit is {limit}")]
    SizeGuard { what: String, count: u128, limit: u128 },

    /// Ill-conditioned linear algebra.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
