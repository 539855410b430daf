use thiserror::Error;

/// Failures grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("input: {0}")]
    Input(#[source] mscca_core::Error),

    #[error("solver: {0}")]
    Solver(#[source] mscca_core::Error),

    #[error("export: {0}")]
    Export(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Export(_) => 4,
        }
    }
}

pub fn export_err(e: impl std::fmt::Display) -> CliError {
    CliError::Export(e.to_string())
}
