use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad snapshot {path}: {detail}")]
    Snapshot { path: String, detail: String },
}

impl ContextError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ContextError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = ContextError> = std::result::Result<T, E>;
