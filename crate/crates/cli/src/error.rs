use gdp_core::GdpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] GdpError),
}

impl CliError {
    /// 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) => match e {
                GdpError::NonFinite { .. }
                | GdpError::Singularity(_)
                | GdpError::Divergence { .. }
                | GdpError::TrajectoryDiverged { .. }
                | GdpError::TrainingDiverged { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

pub type CliResult<T> = Result<T, CliError>;
