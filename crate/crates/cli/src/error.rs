use std::fmt;
use std::process::ExitCode;

/// A failed command with its exit status: 2 for usage and configuration
/// problems, 3 for model, store and remote failures.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn failed(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<twin_core::CoreError> for CliError {
    fn from(e: twin_core::CoreError) -> Self {
        match e {
            twin_core::CoreError::Usage(_) | twin_core::CoreError::Json { .. } => CliError::usage(e.to_string()),
            _ => CliError::failed(e.to_string()),
        }
    }
}

impl From<twin_store::StoreError> for CliError {
    fn from(e: twin_store::StoreError) -> Self {
        match e {
            twin_store::StoreError::Usage(_) => CliError::usage(e.to_string()),
            _ => CliError::failed(e.to_string()),
        }
    }
}

impl From<twin_ingest::IngestError> for CliError {
    fn from(e: twin_ingest::IngestError) -> Self {
        use twin_ingest::IngestError as I;
        match e {
            I::Usage(_) | I::Config { .. } => CliError::usage(e.to_string()),
            I::Store(s) => s.into(),
            I::Core(c) => c.into(),
            I::Transport { .. } => CliError::failed(e.to_string()),
        }
    }
}

impl From<twin_models::ModelError> for CliError {
    fn from(e: twin_models::ModelError) -> Self {
        match e {
            twin_models::ModelError::Usage(_) => CliError::usage(e.to_string()),
            _ => CliError::failed(e.to_string()),
        }
    }
}

impl From<twin_context::ContextError> for CliError {
    fn from(e: twin_context::ContextError) -> Self {
        match e {
            twin_context::ContextError::Usage(_) => CliError::usage(e.to_string()),
            _ => CliError::failed(e.to_string()),
        }
    }
}

impl From<twin_api::RegistryError> for CliError {
    fn from(e: twin_api::RegistryError) -> Self {
        CliError::failed(e.to_string())
    }
}

impl From<twin_api::BuildError> for CliError {
    fn from(e: twin_api::BuildError) -> Self {
        CliError::failed(e.to_string())
    }
}

impl From<twin_api::ApiError> for CliError {
    fn from(e: twin_api::ApiError) -> Self {
        let code = if e.status.as_u16() == 400 { 2 } else { 3 };
        CliError {
            code,
            message: format!("{} ({}): {}", e.error, e.status.as_u16(), e.detail),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::failed(e.to_string())
    }
}
