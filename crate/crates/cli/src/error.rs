use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] stfosls::Error),
}

impl CliError {
    pub fn from_core_config(e: stfosls::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// 2: invalid configuration, 3: solver failure, 4: internal invariant violation.
    pub fn exit_code(&self) -> u8 {
        use stfosls::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(E::SolverDiverged { .. } | E::NotPositiveDefinite { .. }) => 3,
            CliError::Core(E::Invariant(_)) => 4,
            CliError::Core(_) => 2,
        }
    }
}
