use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// The classical scheme was asked for a step with `dt > epsilon^2`.
    #[error("classical scheme requires dt <= epsilon^2 (got dt = {dt}, epsilon^2 = {eps2})")]
    StabilityDomain { dt: f64, eps2: f64 },

    /// A level or cost budget was exhausted.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A coupling invariant that cannot fail mathematically did fail.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ParameterDomain(msg.into()))
}
