use thiserror::Error;

/// Errors surfaced by the session service. Each maps to a stable error code
/// and HTTP status.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("session `{0}` not found")]
    NotFound(String),

    #[error("{message}")]
    Conflict { code: &'static str, message: String },

    #[error("{message}")]
    Invalid { code: &'static str, message: String },

    #[error("the debug panel is disabled on this server")]
    DebugDisabled,

    #[error(transparent)]
    Engine(#[from] revealq_core::Error),

    #[error("storage: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    pub(crate) fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ServiceError::Conflict {
            code,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        ServiceError::Invalid {
            code,
            message: message.into(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "session_not_found",
            ServiceError::Conflict { code, .. } | ServiceError::Invalid { code, .. } => code,
            ServiceError::DebugDisabled => "debug_disabled",
            ServiceError::Engine(revealq_core::Error::InvalidAnswer(_)) => "invalid_answer",
            ServiceError::Engine(revealq_core::Error::Config(_)) => "invalid_request",
            ServiceError::Engine(_) | ServiceError::Io(_) | ServiceError::Json(_) => "internal",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::NotFound(_) | ServiceError::DebugDisabled => 404,
            ServiceError::Conflict { .. } => 409,
            ServiceError::Invalid { .. } => 422,
            ServiceError::Engine(revealq_core::Error::InvalidAnswer(_) | revealq_core::Error::Config(_)) => 422,
            ServiceError::Engine(_) | ServiceError::Io(_) | ServiceError::Json(_) => 500,
        }
    }
}

pub type Result<T> = std::result::Result<T, ServiceError>;
