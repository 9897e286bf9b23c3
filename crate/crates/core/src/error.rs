use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error: {0}")]
    Image(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("missing text for {kind} roi #{index} of article {article_id}")]
    MissingText {
        article_id: String,
        kind: String,
        index: usize,
    },
    #[error("all OCR engines failed: {}", .diagnostics.join("; "))]
    AllEnginesFailed { diagnostics: Vec<String> },
    #[error("embedding provider {provider}: {message}")]
    Provider { provider: String, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Image(e.to_string())
    }
}
