use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input data.
    #[error("{0}")]
    Data(String),
    /// Flags that parse but cannot be honoured.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    FailedExperiment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Data(_) => 1,
            Self::Usage(_) => 2,
            Self::NotConverged(_) => 3,
            Self::FailedExperiment(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<tar_aarch::ModelError> for CliError {
    fn from(e: tar_aarch::ModelError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<tar_aarch::montecarlo::MonteCarloError> for CliError {
    fn from(e: tar_aarch::montecarlo::MonteCarloError) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
