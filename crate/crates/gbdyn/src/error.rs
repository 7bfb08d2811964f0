use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input, parameter, or operand had the wrong dimensions.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A non-finite value was produced; names the primitive that failed.
    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    /// The mass-matrix solve failed even after regularization.
    #[error("SPD solve failed: {0}")]
    SolveFailure(String),

    /// Propagated failure from a single step of a multi-step rollout.
    #[error("rollout step {step}: {source}")]
    RolloutStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Training aborted on a non-finite loss.
    #[error("training aborted at epoch {epoch}: {detail}")]
    TrainAbort { epoch: usize, detail: String },

    /// Invalid configuration value or file.
    #[error("config: {0}")]
    Config(String),

    /// A checkpoint or dataset file did not have the expected layout.
    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(context: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.into(),
            got: got.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
