use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A local operator does not fit the factor it is being lifted onto.
    #[error("dimension mismatch on factor {factor}: expected {expected}x{expected}, got {rows}x{cols}")]
    FactorDimension {
        factor: usize,
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("shape mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    Shape {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("operands live on different spaces: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "integration failed at step {step} (t = {time}): {reason} \
         [hermiticity drift {hermiticity_drift:e}, trace {trace}]"
    )]
    Integration {
        step: usize,
        time: f64,
        reason: String,
        hermiticity_drift: f64,
        trace: f64,
    },

    #[error("numerical health check failed: {0}")]
    NumericalHealth(String),

    #[error("conditional post-click state is undefined: click weight {weight:e}")]
    UndefinedConditionalState { weight: f64 },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
