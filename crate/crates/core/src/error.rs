use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpError {
    #[error("no old patterns")]
    NoOldPatterns,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate pattern id `{0}`")]
    DuplicateId(String),
    #[error("invalid pattern `{id}`: {reason}")]
    InvalidPattern { id: String, reason: String },
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, SpError>;
