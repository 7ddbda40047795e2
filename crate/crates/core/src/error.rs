use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range 0..={max}")]
    Range { index: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "supply rate has {positive} positive and {negative} negative eigenvalues \
         (min |eigenvalue| {min_abs:.3e}); expected {m} positive and {p} negative"
    )]
    Signature {
        positive: usize,
        negative: usize,
        min_abs: f64,
        m: usize,
        p: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contraction hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("Picard iteration did not converge in {iterations} iterations (last step {last_step:.3e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    #[error("problem size {size} exceeds the configured cap {cap}")]
    MemoryCap { size: usize, cap: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
