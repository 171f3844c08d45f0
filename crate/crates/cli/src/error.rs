use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] franson_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for bad input, 3 for exceeded resource limits, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Core(franson_core::Error::InvalidArgument(_) | franson_core::Error::Unsupported(_)) => 2,
            CliError::Core(franson_core::Error::ResourceLimit { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
