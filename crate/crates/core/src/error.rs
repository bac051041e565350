use thiserror::Error;

use crate::expr::Mode;

/// Failure to parse or validate expression source text. Offsets are 1-based
/// character columns; end-of-input errors point one past the last character.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` takes 1 argument but {found} were given (offset {offset})")]
    Arity {
        name: String,
        found: usize,
        offset: usize,
    },
    #[error("slot `{slot}` is not available in {mode} mode")]
    IllegalSlot { slot: String, mode: Mode },
    #[error("slot `{slot}` is out of range for dimension {bound}")]
    IndexOutOfRange { slot: String, bound: usize },
}

/// Failure while evaluating or differentiating an expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{subtree}`")]
    DivisionByZero { subtree: String },
    #[error("domain error in `{subtree}`: {reason}")]
    Domain { subtree: String, reason: String },
    #[error("`{subtree}` is not differentiable at this point")]
    NonDifferentiable { subtree: String },
    #[error("no value supplied for slot `{slot}`")]
    MissingSlot { slot: String },
}

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("in `{field}`: {source}")]
    Expr {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("delay {tau} is not an integer multiple of the grid step {h}")]
    NonCommensurate { tau: f64, h: f64 },
    #[error("grid does not match the problem: {0}")]
    GridMismatch(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("node {node} out of range (trajectory has {len} nodes)")]
    NodeOutOfRange { node: usize, len: usize },
    #[error("evaluation would need values beyond t2 (node {node})")]
    BeyondHorizon { node: usize },
    #[error("{0}")]
    Missing(String),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn expr(field: impl Into<String>, source: ExprError) -> Self {
        Error::Expr {
            field: field.into(),
            source,
        }
    }

    /// Whether the error stems from malformed input rather than a numerical
    /// failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Eval(_) | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
