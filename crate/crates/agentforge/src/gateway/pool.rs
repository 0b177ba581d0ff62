use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("no healthy instance available")]
    NoHealthyInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulingStrategy {
    RoundRobin,
    LeastLoad,
}

/// Health and load state of one backend instance.
#[derive(Debug, Clone)]
pub struct InstanceState {
    pub instance_id: usize,
    pub healthy: bool,
    pub in_flight: u32,
    pub consecutive_failures: u32,
    pub cooldown_until: Option<u64>,
}

impl InstanceState {
    fn new(instance_id: usize) -> Self {
        Self {
            instance_id,
            healthy: true,
            in_flight: 0,
            consecutive_failures: 0,
            cooldown_until: None,
        }
    }
}

/// A pool of instances for one tool version, plus the round-robin cursor.
#[derive(Debug, Clone)]
pub struct InstancePool {
    instances: Vec<InstanceState>,
    rr_cursor: usize,
}

impl InstancePool {
    pub fn new(instance_count: usize) -> Self {
        assert!(instance_count >= 1);
        Self {
            instances: (0..instance_count).map(InstanceState::new).collect(),
            rr_cursor: 0,
        }
    }

    pub fn instances(&self) -> &[InstanceState] {
        &self.instances
    }

    pub fn instance_mut(&mut self, id: usize) -> &mut InstanceState {
        &mut self.instances[id]
    }

    pub fn healthy_count(&self) -> usize {
        self.instances.iter().filter(|i| i.healthy).count()
    }

    /// Pick an instance. Unhealthy instances are never selected.
    ///
    /// Round-robin cycles healthy instances in id order; least-load picks
    /// the minimal `in_flight`, breaking ties by id.
    pub fn schedule(&mut self, strategy: SchedulingStrategy) -> Result<usize, PoolError> {
        let healthy: Vec<usize> = self
            .instances
            .iter()
            .filter(|i| i.healthy)
            .map(|i| i.instance_id)
            .collect();
        if healthy.is_empty() {
            return Err(PoolError::NoHealthyInstance);
        }
        let chosen = match strategy {
            SchedulingStrategy::RoundRobin => {
                let id = healthy[self.rr_cursor % healthy.len()];
                self.rr_cursor = (self.rr_cursor + 1) % healthy.len();
                id
            }
            SchedulingStrategy::LeastLoad => healthy
                .iter()
                .copied()
                .min_by_key(|&id| (self.instances[id].in_flight, id))
                .expect("non-empty"),
        };
        Ok(chosen)
    }

    pub fn record_success(&mut self, id: usize) {
        self.instances[id].consecutive_failures = 0;
    }

    pub fn record_failure(&mut self, id: usize) {
        self.instances[id].consecutive_failures += 1;
    }

    /// Periodic health pass: quarantine instances past the failure
    /// threshold, and probe quarantined instances whose cooldown elapsed.
    ///
    /// `probe` is called for instances eligible for restoration and should
    /// return true when the backend answers a health check.
    pub fn health_tick(
        &mut self,
        now_ms: u64,
        failure_threshold: u32,
        cooldown_ms: u64,
        mut probe: impl FnMut(usize) -> bool,
    ) {
        for instance in &mut self.instances {
            if instance.healthy {
                if instance.consecutive_failures >= failure_threshold {
                    instance.healthy = false;
                    instance.cooldown_until = Some(now_ms + cooldown_ms);
                }
            } else if instance.cooldown_until.is_some_and(|t| now_ms >= t)
                && probe(instance.instance_id)
            {
                instance.healthy = true;
                instance.consecutive_failures = 0;
                instance.cooldown_until = None;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin_cycles_in_id_order() {
        let mut pool = InstancePool::new(3);
        let picks: Vec<usize> = (0..4)
            .map(|_| pool.schedule(SchedulingStrategy::RoundRobin).unwrap())
            .collect();
        assert_eq!(picks, vec![0, 1, 2, 0]);
    }

    #[test]
    fn round_robin_skips_unhealthy() {
        let mut pool = InstancePool::new(3);
        pool.instance_mut(1).healthy = false;
        let picks: Vec<usize> = (0..4)
            .map(|_| pool.schedule(SchedulingStrategy::RoundRobin).unwrap())
            .collect();
        assert_eq!(picks, vec![0, 2, 0, 2]);
    }

    #[test]
    fn least_load_picks_minimum_in_flight() {
        let mut pool = InstancePool::new(3);
        pool.instance_mut(0).in_flight = 5;
        pool.instance_mut(1).in_flight = 1;
        pool.instance_mut(2).in_flight = 3;
        assert_eq!(pool.schedule(SchedulingStrategy::LeastLoad).unwrap(), 1);
    }

    #[test]
    fn least_load_ties_break_by_id() {
        let mut pool = InstancePool::new(3);
        pool.instance_mut(0).in_flight = 2;
        pool.instance_mut(1).in_flight = 2;
        pool.instance_mut(2).in_flight = 2;
        assert_eq!(pool.schedule(SchedulingStrategy::LeastLoad).unwrap(), 0);
    }

    #[test]
    fn all_unhealthy_errors() {
        let mut pool = InstancePool::new(2);
        pool.instance_mut(0).healthy = false;
        pool.instance_mut(1).healthy = false;
        assert_eq!(
            pool.schedule(SchedulingStrategy::RoundRobin),
            Err(PoolError::NoHealthyInstance)
        );
    }

    #[test]
    fn health_tick_quarantines_and_restores() {
        let mut pool = InstancePool::new(2);
        pool.instance_mut(0).consecutive_failures = 3;
        pool.health_tick(1000, 3, 30_000, |_| true);
        assert!(!pool.instances()[0].healthy);
        assert_eq!(pool.instances()[0].cooldown_until, Some(31_000));
        // other instance untouched
        assert!(pool.instances()[1].healthy);

        // before cooldown elapses nothing changes
        pool.health_tick(20_000, 3, 30_000, |_| true);
        assert!(!pool.instances()[0].healthy);

        // past cooldown, successful probe restores it
        pool.health_tick(31_000, 3, 30_000, |_| true);
        assert!(pool.instances()[0].healthy);
        assert_eq!(pool.instances()[0].consecutive_failures, 0);
    }

    #[test]
    fn failed_probe_keeps_instance_out() {
        let mut pool = InstancePool::new(1);
        pool.instance_mut(0).consecutive_failures = 3;
        pool.health_tick(0, 3, 100, |_| true);
        pool.health_tick(200, 3, 100, |_| false);
        assert!(!pool.instances()[0].healthy);
    }

    #[test]
    fn least_load_fairness_under_equal_latency() {
        // Event-driven micro-sim: 4 instances, 200 requests of equal
        // latency admitted as slots free up. At steady state the in-flight
        // spread across instances stays <= 1.
        let mut pool = InstancePool::new(4);
        let mut completions: Vec<(u64, usize)> = Vec::new(); // (finish_time, id)
        let mut now = 0u64;
        let latency = 50u64;
        let concurrency = 8usize;
        let mut issued = 0;
        while issued < 200 {
            while completions.len() < concurrency && issued < 200 {
                let id = pool.schedule(SchedulingStrategy::LeastLoad).unwrap();
                pool.instance_mut(id).in_flight += 1;
                completions.push((now + latency, id));
                issued += 1;
                let loads: Vec<u32> =
                    pool.instances().iter().map(|i| i.in_flight).collect();
                let spread = loads.iter().max().unwrap() - loads.iter().min().unwrap();
                assert!(spread <= 1, "spread {spread} with loads {loads:?}");
            }
            completions.sort();
            let (t, id) = completions.remove(0);
            now = t;
            pool.instance_mut(id).in_flight -= 1;
        }
    }
}
