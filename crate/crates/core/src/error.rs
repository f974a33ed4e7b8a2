use thiserror::Error;

/// Errors raised by constructions and solvers in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A network, program or tree violates a structural invariant.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Source and sink are not connected where a connection is required.
    #[error("source and sink are disconnected")]
    Disconnected,
    /// An input label or index is outside the domain of a program.
    #[error("unknown input: {0}")]
    UnknownInput(String),
    /// A parameter is outside its documented range.
    #[error("parameter out of range: {0}")]
    Range(String),
    /// A materialized object would exceed the configured size cap.
    #[error("dimension {dim} exceeds the cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    /// A certificate passed to a bound check is not a path or cut of the right kind.
    #[error("invalid certificate: {0}")]
    Certificate(String),
    /// A classical model does not satisfy the promise it was declared with.
    #[error("promise violated: {0}")]
    Promise(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
