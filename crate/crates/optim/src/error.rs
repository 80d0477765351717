use thiserror::Error;

/// Error returned by a user-supplied objective.
pub type EvalError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("evaluation failed at {point:?}: {source}")]
    Evaluation { point: Vec<f64>, source: EvalError },
    #[error("gaussian process: {0}")]
    Surrogate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
