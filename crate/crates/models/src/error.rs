use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("usage error: {0}")]
    Usage(String),
    /// A scenario asked to perturb an input the model was not trained with.
    #[error("model has no input for {0}")]
    MissingInput(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("bad model file {what}: {detail}")]
    Format { what: String, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] twin_core::CoreError),
}

impl ModelError {
    pub fn usage(msg: impl Into<String>) -> Self {
        ModelError::Usage(msg.into())
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        ModelError::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
