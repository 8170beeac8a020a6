use objrestore::Error;

/// Failures of a service operation, before mapping to HTTP or exit codes.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("request body exceeds {limit} bytes")]
    TooLarge { limit: usize },
    #[error("superseded by a newer preview request")]
    Superseded,
    #[error("internal error: {0}")]
    Internal(String),
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

impl ServiceError {
    /// HTTP status code for this failure.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::Core(e) => match e {
                Error::InvalidArgument(_) => 400,
                Error::Parse { .. } | Error::UnsupportedFormat(_) => 422,
                Error::InsufficientData { .. }
                | Error::UnobservableBlur
                | Error::EmptySelection(_)
                | Error::ExportPolicy(_) => 409,
                Error::ExternalUnavailable(_) | Error::ExternalProtocol(_) => 502,
                Error::Io(_) => 500,
            },
            ServiceError::Internal(_) => 500,
            ServiceError::NotFound(_) => 404,
            ServiceError::Conflict(_) | ServiceError::Superseded => 409,
            ServiceError::TooLarge { .. } => 413,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => match e {
                Error::InvalidArgument(_) => "invalid-argument",
                Error::Parse { .. } => "parse-error",
                Error::UnsupportedFormat(_) => "unsupported-format",
                Error::InsufficientData { .. } => "insufficient-data",
                Error::UnobservableBlur => "unobservable-blur",
                Error::EmptySelection(_) => "empty-selection",
                Error::ExternalUnavailable(_) => "external-unavailable",
                Error::ExternalProtocol(_) => "external-protocol-error",
                Error::ExportPolicy(_) => "export-policy",
                Error::Io(_) => "storage-error",
            },
            ServiceError::NotFound(_) => "not-found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::TooLarge { .. } => "payload-too-large",
            ServiceError::Superseded => "superseded",
            ServiceError::Internal(_) => "internal",
        }
    }

    /// Message safe to show to clients. Storage errors are not echoed since
    /// they may carry server paths.
    pub fn public_message(&self) -> String {
        match self {
            ServiceError::Core(Error::Io(_)) => "storage error".into(),
            ServiceError::Internal(_) => "internal error".into(),
            other => other.to_string(),
        }
    }

    pub fn hint(&self) -> Option<&'static str> {
        match self {
            ServiceError::Core(Error::ExternalUnavailable(_))
            | ServiceError::Core(Error::ExternalProtocol(_)) => {
                Some("retry with backend \"builtin\"")
            }
            ServiceError::Core(Error::ExportPolicy(_)) => {
                Some("set \"force\": true to export anyway")
            }
            _ => None,
        }
    }
}
