use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{read_tasks, TaskRecord, TraceError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset invalid at line {line}: {message}")]
    DatasetInvalid { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("metrics error: {0}")]
    Metrics(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    ExactMatch,
}

/// A local benchmark: a named JSONL file of [`TaskRecord`]s plus the scoring
/// rule applied to final answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkAdapter {
    pub name: String,
    pub dataset_path: PathBuf,
    pub scoring: Scoring,
}

impl BenchmarkAdapter {
    pub fn exact_match(name: impl Into<String>, dataset_path: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            dataset_path: dataset_path.into(),
            scoring: Scoring::ExactMatch,
        }
    }

    pub fn load(&self) -> Result<Vec<TaskRecord>, HarnessError> {
        let tasks = read_tasks(&self.dataset_path).map_err(|e| match e {
            TraceError::SchemaViolation { line, message } => {
                HarnessError::DatasetInvalid { line, message }
            }
            TraceError::IoFailure(io) => HarnessError::Io(io),
        })?;
        if tasks.is_empty() {
            return Err(HarnessError::EmptyDataset);
        }
        Ok(tasks)
    }
}
