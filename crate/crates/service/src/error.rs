use sp_core::SpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("knowledge base `{0}` not found")]
    KbNotFound(String),
    #[error("session `{0}` not found")]
    SessionNotFound(String),
    #[error("session `{session}` has no alignment {index}")]
    AlignmentNotFound { session: String, index: usize },
    #[error("invalid knowledge file: {0}")]
    InvalidKnowledge(SpError),
    #[error("knowledge file contains no patterns")]
    EmptyKnowledge,
    #[error("invalid findings: {0}")]
    InvalidFindings(SpError),
    #[error("search failed: {0}")]
    Engine(SpError),
    #[error("storage error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt stored record: {0}")]
    Record(#[from] serde_json::Error),
}

impl ServiceError {
    /// Stable identifier clients can branch on.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::KbNotFound(_) => "kb_not_found",
            ServiceError::SessionNotFound(_) => "session_not_found",
            ServiceError::AlignmentNotFound { .. } => "alignment_not_found",
            ServiceError::InvalidKnowledge(_) => "invalid_knowledge",
            ServiceError::EmptyKnowledge => "empty_knowledge",
            ServiceError::InvalidFindings(_) => "invalid_findings",
            ServiceError::Engine(_) => "engine_error",
            ServiceError::Io(_) => "storage_error",
            ServiceError::Record(_) => "corrupt_record",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::KbNotFound(_)
            | ServiceError::SessionNotFound(_)
            | ServiceError::AlignmentNotFound { .. } => 404,
            ServiceError::InvalidKnowledge(_)
            | ServiceError::EmptyKnowledge
            | ServiceError::InvalidFindings(_) => 422,
            ServiceError::Engine(_) | ServiceError::Io(_) | ServiceError::Record(_) => 500,
        }
    }
}
