use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("invalid urn parameters: {0}")]
    InvalidUrn(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("illegal cluster state: {0}")]
    IllegalState(String),
    #[error("invalid effect request: {0}")]
    InvalidEffect(String),
    #[error("draw log: {0}")]
    DrawLog(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}
