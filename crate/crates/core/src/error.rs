use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("local solve failed on element {element}: {reason}")]
    NumericalFailure { element: usize, reason: String },
    #[error("singular matrix: zero pivot at step {pivot}")]
    SingularMatrix { pivot: usize },
    #[error("invalid state: {0}")]
    State(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
