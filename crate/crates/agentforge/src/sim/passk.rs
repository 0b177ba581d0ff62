//! pass@k curve experiments driven by the mock policy.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, Status, ToolRequest};
use crate::orchestrator::{generate_uninterrupted, Environment};
use crate::trajectory::{pass_at_k, ObservationRecord, TaskRecord};

use super::policy::MockPolicy;

/// Routes mock-policy tool calls through a real [`Gateway`], converting the
/// unified response into an observation record.
pub struct GatewayEnv {
    gateway: Arc<Gateway>,
    deadline_ms: u64,
}

impl GatewayEnv {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Self {
            gateway,
            deadline_ms: 180_000,
        }
    }
}

impl Environment for GatewayEnv {
    fn observe(&self, tool: &str, payload: &str) -> ObservationRecord {
        let params: BTreeMap<String, serde_json::Value> = serde_json::from_str(payload)
            .unwrap_or_else(|_| {
                // Malformed payloads still reach the gateway as raw text.
                [("raw".to_string(), serde_json::Value::String(payload.into()))]
                    .into_iter()
                    .collect()
            });
        let request = ToolRequest {
            request_id: format!("sim-{}", self.gateway.clock().now_ms()),
            tool: tool.to_string(),
            version: None,
            params,
            deadline_ms: self.deadline_ms,
        };
        let response = self.gateway.dispatch(&request);
        match response.status {
            Status::Success => ObservationRecord {
                status_code: Some(200),
                latency_ms: response.metadata.latency_ms,
                content: response.content.unwrap_or_default(),
                truncated: response.metadata.truncated,
                error_code: response.metadata.error_code,
            },
            Status::Error => ObservationRecord {
                status_code: Some(502),
                latency_ms: response.metadata.latency_ms,
                content: response.error.unwrap_or_default(),
                truncated: false,
                error_code: response.error_code,
            },
        }
    }
}

/// One (k, value) point of an aggregated pass@k curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassKPoint {
    pub k: u64,
    pub value: f64,
}

/// Run `n_samples` independent rollouts per task and average the unbiased
/// pass@k estimator over tasks for each k in `k_grid`.
pub fn passk_experiment<E: Environment>(
    tasks: &[TaskRecord],
    policy: &MockPolicy,
    n_samples: u64,
    k_grid: &[u64],
    env: &E,
) -> Vec<PassKPoint> {
    assert!(!tasks.is_empty(), "task set must be non-empty");
    assert!(
        k_grid.iter().all(|&k| k >= 1 && k <= n_samples),
        "every k must satisfy 1 <= k <= n_samples"
    );
    let per_task_successes: Vec<u64> = tasks
        .iter()
        .map(|task| {
            (0..n_samples)
                .filter(|i| {
                    let id = format!("passk-{}-s{i}", task.id);
                    generate_uninterrupted(task, &id, 0, policy, env).is_success()
                })
                .count() as u64
        })
        .collect();
    k_grid
        .iter()
        .map(|&k| {
            let mean = per_task_successes
                .iter()
                .map(|&c| pass_at_k(n_samples, c, k).expect("validated k range"))
                .sum::<f64>()
                / tasks.len() as f64;
            PassKPoint { k, value: mean }
        })
        .collect()
}
