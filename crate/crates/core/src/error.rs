use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected_width}x{expected_height}, got {actual_width}x{actual_height}")]
    DimensionMismatch {
        context: &'static str,
        expected_width: usize,
        expected_height: usize,
        actual_width: usize,
        actual_height: usize,
    },

    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        reason: &'static str,
    },

    #[error("format error in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sequence error: {0}")]
    Sequence(String),

    #[error("luminance planes differ at pixel {index}")]
    LuminanceMismatch { index: usize },

    #[error("colorizer failed on frame {frame}: {kind}")]
    Provider { frame: usize, kind: ProviderError },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("image codec error on {}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Failure modes of a colorization provider, each reported distinctly.
#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("failed to launch provider: {0}")]
    Launch(String),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("no reply within {0:?}")]
    Timeout(std::time::Duration),
    #[error("reply has dimensions {actual_width}x{actual_height}, expected {expected_width}x{expected_height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        actual_width: usize,
        actual_height: usize,
    },
    #[error("provider exited with status {0}")]
    Exited(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("provider reported: {0}")]
    Reported(String),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected_width: expected.0,
            expected_height: expected.1,
            actual_width: actual.0,
            actual_height: actual.1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn provider(frame: usize, kind: ProviderError) -> Self {
        Error::Provider { frame, kind }
    }

    /// Process exit code: 1 for invalid input or configuration, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Sequence(_)
            | Error::Format { .. }
            | Error::Json { .. }
            | Error::InvalidDimensions { .. } => 1,
            Error::DimensionMismatch { .. }
            | Error::LuminanceMismatch { .. }
            | Error::Provider { .. }
            | Error::Io { .. }
            | Error::Image { .. } => 2,
        }
    }
}
