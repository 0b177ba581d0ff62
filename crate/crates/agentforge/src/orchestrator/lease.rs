use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Who owns accelerator memory right now.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    None,
    Sampling,
    Training,
}

#[derive(Debug, Error, PartialEq)]
pub enum LeaseError {
    #[error("lease revoked: checkpoint the partial trajectory and yield")]
    LeaseRevoked,
    #[error("operation requires the {required:?} phase (current holder is {current:?})")]
    WrongPhase { required: Phase, current: Phase },
}

/// One entry of the append-only transitions log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub at_ms: u64,
    pub from: Phase,
    pub to: Phase,
}

/// Grants exclusive ownership of the memory phase to either the samplers or
/// the trainer.
///
/// A phase change never happens while generations are in flight: the request
/// queues, samplers observe [`LeaseCoordinator::revocation_pending`] and
/// checkpoint, and the grant fires when the last generation drains.
#[derive(Debug)]
pub struct LeaseCoordinator {
    holder: Phase,
    policy_version: u64,
    version_at_grant: u64,
    in_flight: usize,
    pending: VecDeque<Phase>,
    transitions: Vec<Transition>,
}

impl Default for LeaseCoordinator {
    fn default() -> Self {
        Self::new()
    }
}

impl LeaseCoordinator {
    pub fn new() -> Self {
        Self {
            holder: Phase::None,
            policy_version: 0,
            version_at_grant: 0,
            in_flight: 0,
            pending: VecDeque::new(),
            transitions: Vec::new(),
        }
    }

    pub fn holder(&self) -> Phase {
        self.holder
    }

    pub fn policy_version(&self) -> u64 {
        self.policy_version
    }

    pub fn version_at_grant(&self) -> u64 {
        self.version_at_grant
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// True when a queued phase change is waiting for samplers to drain.
    pub fn revocation_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    fn grant(&mut self, to: Phase, now_ms: u64) {
        self.transitions.push(Transition {
            at_ms: now_ms,
            from: self.holder,
            to,
        });
        self.holder = to;
        self.version_at_grant = self.policy_version;
    }

    /// Request a phase change. Returns true if granted immediately; otherwise
    /// the request queues and is granted once in-flight work drains.
    pub fn request_phase(&mut self, target: Phase, now_ms: u64) -> bool {
        if target == self.holder && self.pending.is_empty() {
            return true;
        }
        if self.in_flight == 0 && self.pending.is_empty() {
            self.grant(target, now_ms);
            return true;
        }
        self.pending.push_back(target);
        false
    }

    /// Register one in-flight generation. Fails with `LeaseRevoked` when a
    /// phase change is queued so the sampler yields instead of starting work.
    pub fn begin_generation(&mut self) -> Result<(), LeaseError> {
        if self.holder != Phase::Sampling {
            return Err(LeaseError::WrongPhase {
                required: Phase::Sampling,
                current: self.holder,
            });
        }
        if self.revocation_pending() {
            return Err(LeaseError::LeaseRevoked);
        }
        self.in_flight += 1;
        Ok(())
    }

    /// Check before each forward step; `LeaseRevoked` tells the sampler to
    /// checkpoint and call [`LeaseCoordinator::end_generation`].
    pub fn forward_allowed(&self) -> Result<(), LeaseError> {
        if self.holder != Phase::Sampling {
            return Err(LeaseError::WrongPhase {
                required: Phase::Sampling,
                current: self.holder,
            });
        }
        if self.revocation_pending() {
            return Err(LeaseError::LeaseRevoked);
        }
        Ok(())
    }

    /// Drain one generation (finished or checkpointed). Grants queued phase
    /// requests once nothing is in flight.
    pub fn end_generation(&mut self, now_ms: u64) {
        assert!(self.in_flight > 0, "end_generation without begin");
        self.in_flight -= 1;
        self.drain_pending(now_ms);
    }

    fn drain_pending(&mut self, now_ms: u64) {
        while self.in_flight == 0 {
            match self.pending.pop_front() {
                Some(target) => {
                    if target != self.holder {
                        self.grant(target, now_ms);
                    }
                }
                None => break,
            }
        }
    }

    /// Weight sync at the end of a training phase: the next sampling grant
    /// observes the incremented version.
    pub fn bump_version(&mut self) -> Result<u64, LeaseError> {
        if self.holder != Phase::Training {
            return Err(LeaseError::WrongPhase {
                required: Phase::Training,
                current: self.holder,
            });
        }
        self.policy_version += 1;
        Ok(self.policy_version)
    }
}

/// Check the transitions log for exactly-one-holder consistency: each
/// transition departs from the holder the previous one installed.
pub fn transitions_consistent(transitions: &[Transition]) -> bool {
    let mut holder = Phase::None;
    let mut last_at = 0;
    for t in transitions {
        if t.from != holder || t.to == t.from || t.at_ms < last_at {
            return false;
        }
        holder = t.to;
        last_at = t.at_ms;
    }
    true
}
