//! Persistent, auditable trajectory store.
//!
//! A single append-only log file holds trajectory records and lifecycle
//! events interleaved, each wrapped in a length-prefixed JSON frame carrying
//! a monotonic sequence number. Replaying the log reconstructs the store
//! exactly, so crash recovery and audits read the same artifact.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::Trajectory;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("log corrupt at byte {offset}: {message}")]
    Corrupt { offset: u64, message: String },
    #[error("unknown trajectory {0:?}")]
    UnknownTrajectory(String),
    #[error("trajectory {0:?} was already consumed for training")]
    AlreadyConsumed(String),
    #[error("trajectory {0:?} already has a stored record")]
    DuplicateTrajectory(String),
}

/// Lifecycle events recorded against a trajectory id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RequestIssued,
    ResponseReceived,
    EnvFeedback,
    EvaluationOutcome,
    TrainingConsumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub trajectory_id: String,
    pub kind: EventKind,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogRecord {
    Trajectory { seq: u64, trajectory: Trajectory },
    Event(EventRecord),
}

/// In-memory view of one stored trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrajectory {
    pub trajectory: Trajectory,
    pub stored_seq: u64,
    pub consumed: bool,
}

/// Append-only trajectory store with an in-memory index.
///
/// When opened on a path every append is written through before the index
/// is updated; an in-memory store (no path) supports tests and dry runs.
#[derive(Debug)]
pub struct TrajectoryStore {
    file: Option<File>,
    next_seq: u64,
    records: BTreeMap<String, StoredTrajectory>,
    events: Vec<EventRecord>,
}

impl TrajectoryStore {
    /// A store that never touches disk.
    pub fn in_memory() -> Self {
        Self {
            file: None,
            next_seq: 0,
            records: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    /// Open (or create) a log file, replaying any existing records.
    pub fn open<P: AsRef<Path>>(path: P) -> Result<Self, StoreError> {
        let mut store = Self::in_memory();
        if path.as_ref().exists() {
            let mut bytes = Vec::new();
            File::open(&path)?.read_to_end(&mut bytes)?;
            for (offset, record) in decode_log(&bytes)? {
                store.apply(record).map_err(|e| match e {
                    StoreError::Corrupt { .. } | StoreError::Io(_) => e,
                    other => StoreError::Corrupt {
                        offset,
                        message: other.to_string(),
                    },
                })?;
            }
        }
        store.file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(store)
    }

    fn write_through(&mut self, record: &LogRecord) -> Result<(), StoreError> {
        if let Some(file) = &mut self.file {
            let body = serde_json::to_vec(record).expect("log records serialize");
            file.write_all(&(body.len() as u32).to_le_bytes())?;
            file.write_all(&body)?;
            file.flush()?;
        }
        Ok(())
    }

    /// Validate and index a record (shared by appends and replay).
    fn apply(&mut self, record: LogRecord) -> Result<(), StoreError> {
        let seq = match &record {
            LogRecord::Trajectory { seq, .. } => *seq,
            LogRecord::Event(e) => e.seq,
        };
        if seq != self.next_seq {
            return Err(StoreError::Corrupt {
                offset: 0,
                message: format!("sequence number {seq} out of order (expected {})", self.next_seq),
            });
        }
        match record {
            LogRecord::Trajectory { seq, trajectory } => {
                if self.records.contains_key(&trajectory.id) {
                    return Err(StoreError::DuplicateTrajectory(trajectory.id));
                }
                self.records.insert(
                    trajectory.id.clone(),
                    StoredTrajectory {
                        trajectory,
                        stored_seq: seq,
                        consumed: false,
                    },
                );
            }
            LogRecord::Event(event) => {
                if event.kind == EventKind::TrainingConsumed {
                    let stored = self
                        .records
                        .get_mut(&event.trajectory_id)
                        .ok_or_else(|| StoreError::UnknownTrajectory(event.trajectory_id.clone()))?;
                    if stored.consumed {
                        return Err(StoreError::AlreadyConsumed(event.trajectory_id.clone()));
                    }
                    stored.consumed = true;
                }
                self.events.push(event);
            }
        }
        self.next_seq += 1;
        Ok(())
    }

    /// Record a lifecycle event. Events may precede the trajectory record
    /// (a request is issued before the rollout completes); only
    /// `training_consumed` requires a prior stored record.
    pub fn append_event(
        &mut self,
        trajectory_id: &str,
        kind: EventKind,
        at_ms: u64,
    ) -> Result<u64, StoreError> {
        let seq = self.next_seq;
        let record = LogRecord::Event(EventRecord {
            seq,
            trajectory_id: trajectory_id.to_string(),
            kind,
            at_ms,
        });
        // Validate before writing so a rejected event leaves no log entry.
        if kind == EventKind::TrainingConsumed {
            match self.records.get(trajectory_id) {
                None => return Err(StoreError::UnknownTrajectory(trajectory_id.into())),
                Some(s) if s.consumed => {
                    return Err(StoreError::AlreadyConsumed(trajectory_id.into()))
                }
                Some(_) => {}
            }
        }
        self.write_through(&record)?;
        self.apply(record)?;
        Ok(seq)
    }

    /// Persist a completed trajectory.
    pub fn append_trajectory(&mut self, trajectory: &Trajectory) -> Result<u64, StoreError> {
        if self.records.contains_key(&trajectory.id) {
            return Err(StoreError::DuplicateTrajectory(trajectory.id.clone()));
        }
        let seq = self.next_seq;
        let record = LogRecord::Trajectory {
            seq,
            trajectory: trajectory.clone(),
        };
        self.write_through(&record)?;
        self.apply(record)?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StoredTrajectory> {
        self.records.get(id)
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &StoredTrajectory> {
        self.records.values()
    }

    /// Events for one trajectory in log order.
    pub fn events_for(&self, id: &str) -> Vec<&EventRecord> {
        self.events.iter().filter(|e| e.trajectory_id == id).collect()
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    /// Unconsumed trajectories with version gap ≤ `max_staleness`, oldest
    /// stored first.
    pub fn eligible_for_training(
        &self,
        current_version: u64,
        max_staleness: u64,
    ) -> Vec<&StoredTrajectory> {
        let mut eligible: Vec<&StoredTrajectory> = self
            .records
            .values()
            .filter(|s| {
                !s.consumed
                    && current_version.saturating_sub(s.trajectory.policy_version) <= max_staleness
            })
            .collect();
        eligible.sort_by_key(|s| s.stored_seq);
        eligible
    }

    pub fn unconsumed_count(&self) -> usize {
        self.records.values().filter(|s| !s.consumed).count()
    }
}

fn decode_log(bytes: &[u8]) -> Result<Vec<(u64, LogRecord)>, StoreError> {
    let mut records = Vec::new();
    let mut cursor = 0usize;
    while cursor < bytes.len() {
        if cursor + 4 > bytes.len() {
            return Err(StoreError::Corrupt {
                offset: cursor as u64,
                message: "truncated length prefix".into(),
            });
        }
        let len =
            u32::from_le_bytes(bytes[cursor..cursor + 4].try_into().expect("4 bytes")) as usize;
        let start = cursor + 4;
        let end = start.checked_add(len).ok_or_else(|| StoreError::Corrupt {
            offset: cursor as u64,
            message: "frame length overflows".into(),
        })?;
        if end > bytes.len() {
            return Err(StoreError::Corrupt {
                offset: cursor as u64,
                message: "truncated frame body".into(),
            });
        }
        let record: LogRecord =
            serde_json::from_slice(&bytes[start..end]).map_err(|e| StoreError::Corrupt {
                offset: cursor as u64,
                message: e.to_string(),
            })?;
        records.push((cursor as u64, record));
        cursor = end;
    }
    Ok(records)
}
