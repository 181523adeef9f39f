use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical overflow in layer {layer}")]
    NumericalOverflow { layer: usize },

    #[error("non-finite gradient at {path}")]
    NonFiniteGradient { path: String },

    #[error("invalid class index {class} (model has {classes} classes)")]
    InvalidClass { class: usize, classes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate init batch: {0}")]
    DegenerateInit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid initialization: {0}")]
    InvalidInitialization(String),

    #[error("training diverged at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize },

    #[error("undefined posterior: {0}")]
    UndefinedPosterior(String),

    #[error("not enough eligible data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// caller's configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalOverflow { .. }
                | Error::NonFiniteGradient { .. }
                | Error::Divergence { .. }
                | Error::UndefinedPosterior(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
