use thiserror::Error;

/// Errors raised by the spectral core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("non-finite {quantity} at t = {time}")]
    NonFinite { quantity: String, time: f64 },
    #[error("trajectory: {0}")]
    Trajectory(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<V> = std::result::Result<V, Error>;

pub(crate) fn invalid<V>(msg: impl Into<String>) -> Result<V> {
    Err(Error::InvalidArgument(msg.into()))
}
