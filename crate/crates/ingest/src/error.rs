use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    /// The source could not be reached or answered garbage; retry next tick.
    #[error("transport failure for {source_id}: {detail}")]
    Transport { source_id: String, detail: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error in {path}: {detail}")]
    Config { path: String, detail: String },
    #[error(transparent)]
    Store(#[from] twin_store::StoreError),
    #[error(transparent)]
    Core(#[from] twin_core::CoreError),
}

impl IngestError {
    pub fn transport(source_id: &str, detail: impl Into<String>) -> Self {
        IngestError::Transport {
            source_id: source_id.to_string(),
            detail: detail.into(),
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, IngestError::Transport { .. })
    }
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;
