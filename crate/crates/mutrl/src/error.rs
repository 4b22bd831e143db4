//! Error type shared by every module in the crate.

use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// Validation errors describe rejected inputs (bad configs, bad arguments);
/// everything else is an execution failure. The CLI maps the former to exit
/// code 1 and the latter to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration file or config struct violated an invariant.
    /// `field` is the path of the offending field.
    #[error("invalid config at `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    /// A function argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Tensor or layer shapes disagree.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// A gradient became NaN or infinite in the given layer.
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    /// Training loss became NaN at the given environment step.
    #[error("training diverged (non-finite loss) at step {step}")]
    Divergence { step: u64 },

    /// The requested action-selection mode is not supported by the agent.
    #[error("unsupported action mode: {0}")]
    UnsupportedMode(String),

    /// A policy emitted an out-of-range action.
    #[error("policy emitted invalid action {action} (valid: 0..{actions}) at step {step}")]
    InvalidAction {
        action: usize,
        actions: usize,
        step: u32,
    },

    /// `step` was called on a terminal state.
    #[error("cannot step a terminal state")]
    TerminalStep,

    /// A mutation operator was applied to an algorithm it does not target.
    #[error("operator {operator} is not applicable to {algorithm}")]
    NotApplicable { operator: String, algorithm: String },

    /// An aggregate operation received no usable input.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Every pair was excluded from a triviality aggregate.
    #[error("triviality undefined: the original succeeded on no configuration in any pair")]
    DegenerateTriviality,

    /// A pipeline phase required an artifact that has not been produced.
    #[error("missing artifact `{key}`; run the producing phase first")]
    MissingArtifact { key: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("serialization error on {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

impl Error {
    /// Convenience constructor for [`Error::InvalidConfig`].
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Convenience constructor for [`Error::InvalidArgument`].
    pub fn arg(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// Attach a path to an io error.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a path to a serde error.
    pub fn json(path: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors the CLI reports as validation failures (exit 1).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig { .. }
                | Error::InvalidArgument(_)
                | Error::NotApplicable { .. }
        )
    }
}
