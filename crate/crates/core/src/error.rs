use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Walk or experiment configuration is not admissible.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An operation parameter is out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The requested quantity is undefined in this dimension or regime.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
