use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("deviation `{field}` = {value} outside the {regime} regime")]
    InvalidDeviation {
        field: &'static str,
        value: f64,
        regime: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("formula parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
