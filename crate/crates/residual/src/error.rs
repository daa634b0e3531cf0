use std::path::Path;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    /// Malformed input, missing files, invalid flags.
    Input = 2,
    /// An experiment could not be carried out (e.g. instance construction).
    Failure = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::Input,
            CliError::Failure(_) => ExitCode::Failure,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl From<residual_core::Error> for CliError {
    fn from(e: residual_core::Error) -> Self {
        match e {
            residual_core::Error::ConstructionFailed { .. } => CliError::Failure(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
