use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Construction-time invariant violation (bad pmf, unstable model, ...).
    #[error("invalid model: {0}")]
    Model(String),

    /// Argument outside an LST convergence strip (Condition 3 failure).
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketed root search found no sign change.
    #[error("no root: {0}")]
    NoRoot(String),

    /// A truncated series could not reach the requested tolerance.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// Non-finite intermediate value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Asymptotic regime requested does not match the model's loads.
    #[error("regime error: {0}")]
    Regime(String),

    /// 1-D search bracket does not contain a minimum.
    #[error("search error: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;
