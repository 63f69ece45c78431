//! Batch CLI for the wind-power forecasting toolkit: train, predict,
//! evaluate, synthesize, and compare commands plus the versioned model-file
//! format.

pub mod commands;
pub mod config;
pub mod model_file;

/// Command failures split by exit status: usage/configuration problems exit
/// with 2, runtime/training failures with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<dbnwp_core::Error> for CliError {
    fn from(e: dbnwp_core::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}
