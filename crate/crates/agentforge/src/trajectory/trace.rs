use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{TaskRecord, Trajectory};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o failed: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
}

/// Write a trajectory batch as JSONL, one object per line, in order.
///
/// Absent optional fields are omitted rather than serialized as null.
pub fn write_trace<P: AsRef<Path>>(batch: &[Trajectory], path: P) -> Result<(), TraceError> {
    let mut out = BufWriter::new(File::create(path)?);
    for trajectory in batch {
        serde_json::to_writer(&mut out, trajectory)
            .map_err(|e| TraceError::SchemaViolation {
                line: 0,
                message: e.to_string(),
            })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a JSONL trajectory batch, preserving order.
pub fn read_trace<P: AsRef<Path>>(path: P) -> Result<Vec<Trajectory>, TraceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut batch = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trajectory: Trajectory =
            serde_json::from_str(&line).map_err(|e| TraceError::SchemaViolation {
                line: i + 1,
                message: e.to_string(),
            })?;
        batch.push(trajectory);
    }
    Ok(batch)
}

/// Read a JSONL task dataset, reporting the offending line on parse failure.
pub fn read_tasks<P: AsRef<Path>>(path: P) -> Result<Vec<TaskRecord>, TraceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut tasks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let task: TaskRecord =
            serde_json::from_str(&line).map_err(|e| TraceError::SchemaViolation {
                line: i + 1,
                message: e.to_string(),
            })?;
        if task.gold_answer.is_empty() {
            return Err(TraceError::SchemaViolation {
                line: i + 1,
                message: "gold_answer must be non-empty".into(),
            });
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// One row of the pass@k table in a run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtKEntry {
    pub k: u64,
    pub value: f64,
}

/// Companion per-run summary written next to a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub task_count: usize,
    pub trajectory_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pass_at_k: Vec<PassAtKEntry>,
}

pub fn write_summary<P: AsRef<Path>>(summary: &RunSummary, path: P) -> Result<(), TraceError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, summary).map_err(|e| TraceError::SchemaViolation {
        line: 0,
        message: e.to_string(),
    })?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_summary<P: AsRef<Path>>(path: P) -> Result<RunSummary, TraceError> {
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader).map_err(|e| TraceError::SchemaViolation {
        line: 0,
        message: e.to_string(),
    })
}
