use thiserror::Error;

/// Errors raised by the simulator and its helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),

    #[error("strain singularity: 1 + tr(eps) = {0} must be positive")]
    StrainSingularity(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("element {0} is not active")]
    InactiveElement(usize),

    #[error("singular system at step {step}: zero pivot in equation {equation}")]
    SingularSystem { step: usize, equation: usize },

    #[error("newton iteration did not converge at step {step} after {iterations} iterations (residual history {history:?})")]
    NoConvergence {
        step: usize,
        iterations: usize,
        history: Vec<(f64, f64)>,
    },

    #[error("sensitivity with respect to `{0}` is not supported")]
    UnsupportedDesignVariable(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
