use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, lengths or settings that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numeric argument outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// The environment refused or failed a step.
    #[error("environment fault: {0}")]
    Env(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
