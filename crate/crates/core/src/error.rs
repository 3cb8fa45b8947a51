use thiserror::Error;

#[derive(Debug, Error)]
pub enum PikeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The regularizer must be strictly positive for `G + λI` to be factorizable.
    #[error("invalid parameter `lambda`: must be > 0, got {0}")]
    InvalidRegularizer(f64),

    #[error("prior model returned a non-finite state for training row {row}")]
    PriorEvaluation { row: usize },

    #[error("cost function returned a non-finite value ({context})")]
    CostEvaluation { context: String },

    #[error("state diverged (non-finite) at step {step}")]
    Divergence { step: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PikeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PikeError::InvalidInput(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PikeError::InvalidRegularizer(_)
                | PikeError::Numerical(_)
                | PikeError::Divergence { .. }
                | PikeError::PriorEvaluation { .. }
                | PikeError::CostEvaluation { .. }
        )
    }
}

pub type Result<T, E = PikeError> = std::result::Result<T, E>;
