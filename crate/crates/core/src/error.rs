use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series too short: need at least {required} values, got {actual}")]
    Length { required: usize, actual: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("internal numerical error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
