//! Virtual time.
//!
//! All timing-sensitive behavior (backoff delays, deadlines, health
//! cooldowns, the workload simulator) runs against a millisecond counter
//! rather than the wall clock, so tests can assert exact delays.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// A shared, monotonically advancing millisecond clock.
///
/// Cloning yields a handle onto the same underlying counter.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now_ms: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(ms: u64) -> Self {
        Self {
            now_ms: Arc::new(AtomicU64::new(ms)),
        }
    }

    /// Current virtual time in milliseconds.
    pub fn now_ms(&self) -> u64 {
        self.now_ms.load(Ordering::SeqCst)
    }

    /// Advance the clock by `delta_ms` and return the new time.
    pub fn advance(&self, delta_ms: u64) -> u64 {
        self.now_ms.fetch_add(delta_ms, Ordering::SeqCst) + delta_ms
    }

    /// Move the clock forward to `target_ms` if it is not already past it.
    pub fn advance_to(&self, target_ms: u64) {
        self.now_ms.fetch_max(target_ms, Ordering::SeqCst);
    }
}
