use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("insufficient data: need {needed} effective pixels, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("blur is unobservable: region has no measurable gradient energy")]
    UnobservableBlur,

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("external segmenter unavailable: {0}")]
    ExternalUnavailable(String),

    #[error("external segmenter protocol error: {0}")]
    ExternalProtocol(String),

    /// Refused by an output policy; the caller may retry with `force`.
    #[error("export refused: {0}")]
    ExportPolicy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(offset: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: msg.into(),
        }
    }
}
