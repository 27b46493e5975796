use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum GdpError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("trajectory with seed {seed} diverged at snapshot {step}")]
    TrajectoryDiverged { seed: u64, step: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("training aborted at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GdpError>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(GdpError::Contract(msg.into()))
}
