use thiserror::Error;

use audiomt_core::corpus::CorpusError;
use audiomt_core::frontend::FrontendError;
use audiomt_core::grammar::GrammarError;
use audiomt_core::metrics::MetricError;
use audiomt_core::model::{CheckpointError, ModelError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("checkpoint not found: {0}")]
    CheckpointNotFound(String),
    #[error("run directory {0} is locked by another command (remove the .lock file if stale)")]
    Locked(String),
    #[error("divergence detected: {0}")]
    DivergenceDetected(String),
}

impl HarnessError {
    /// 0 success, 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Locked(_) => 1,
            HarnessError::Data(_) | HarnessError::CheckpointNotFound(_) => 2,
            HarnessError::DivergenceDetected(_) => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        HarnessError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<CorpusError> for HarnessError {
    fn from(e: CorpusError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<GrammarError> for HarnessError {
    fn from(e: GrammarError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<FrontendError> for HarnessError {
    fn from(e: FrontendError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<MetricError> for HarnessError {
    fn from(e: MetricError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::DivergenceDetected { .. } => HarnessError::DivergenceDetected(e.to_string()),
            other => HarnessError::Data(other.to_string()),
        }
    }
}

impl From<CheckpointError> for HarnessError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::NotFound(p) => HarnessError::CheckpointNotFound(p),
            other => HarnessError::Data(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
