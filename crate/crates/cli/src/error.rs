use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("comparison failed: {0}")]
    Comparison(String),
    #[error(transparent)]
    Model(#[from] revevo::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Comparison(_) => 2,
            Self::Model(revevo::Error::InvalidArgument(_) | revevo::Error::DimensionMismatch { .. }) => 1,
            _ => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
