//! Deterministic asynchronous-pipeline simulation.
//!
//! Samplers, the lease coordinator, the store, and the trainer advance in a
//! single-threaded event loop over the virtual clock. Concurrency is
//! simulated (interleaved steps), which keeps every run bit-reproducible
//! while still exercising the contracts a threaded deployment relies on:
//! drain-before-grant, checkpoint/resume, staleness bounds, and at-most-once
//! consumption.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::clock::VirtualClock;
use crate::trajectory::{
    normalize_answer, ActionRecord, ObservationRecord, Step, TaskRecord, Trajectory,
};

use super::lease::{LeaseCoordinator, LeaseError, Phase, Transition};
use super::ops::{
    clipped_is_weight, regulate_concurrency, select_training_batch, OffPolicyConfig,
    OrchestratorError,
};
use super::store::{EventKind, TrajectoryStore};

/// One decision of a rollout policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyDecision {
    Invoke {
        thought: String,
        tool: String,
        payload: String,
    },
    Answer {
        text: String,
    },
}

/// A policy whose decisions depend only on (task, trajectory id, steps taken
/// so far), so a checkpointed rollout resumes exactly where it stopped.
pub trait RolloutPolicy {
    fn decide(&self, task: &TaskRecord, trajectory_id: &str, steps_taken: usize) -> PolicyDecision;

    /// Log-probability the policy at `version` assigns to the trajectory;
    /// used for importance weighting.
    fn log_prob(&self, trajectory_id: &str, version: u64) -> f64;
}

/// The tool side of the loop, abstracted so tests can swap the gateway out.
pub trait Environment {
    fn observe(&self, tool: &str, payload: &str) -> ObservationRecord;
}

/// Deterministic instant-echo environment.
#[derive(Debug, Clone, Copy)]
pub struct EchoEnv {
    pub latency_ms: u64,
}

impl Environment for EchoEnv {
    fn observe(&self, tool: &str, payload: &str) -> ObservationRecord {
        ObservationRecord::ok(format!("echo[{tool}]: {payload}"), self.latency_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestratorConfig {
    /// Number of sampler workers (each drives one rollout at a time).
    pub sampler_count: usize,
    /// Upper bound on in-flight rollouts.
    pub target_concurrency: usize,
    /// Trajectories per training batch.
    pub batch_size: usize,
    /// Freshness bound S and importance clip.
    pub off_policy: OffPolicyConfig,
    /// Stop after this many training batches.
    pub train_batches: usize,
    /// Virtual time per forward step.
    pub step_latency_ms: u64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            sampler_count: 4,
            target_concurrency: 8,
            batch_size: 8,
            off_policy: OffPolicyConfig::default(),
            train_batches: 4,
            step_latency_ms: 50,
        }
    }
}

/// A rollout in progress; also the checkpoint format at lease revocation
/// (the policy contract makes `trajectory.turns()` a full continuation).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ActiveRollout {
    task_index: usize,
    trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrchestrationReport {
    pub trajectories_stored: usize,
    pub batches_trained: usize,
    pub final_version: u64,
    /// Consumed trajectories violating the staleness bound (must be 0).
    pub staleness_violations: usize,
    pub max_in_flight: usize,
    pub checkpoint_resumes: usize,
    pub mean_is_weight: f64,
    pub successes: usize,
    pub transitions: Vec<Transition>,
}

/// Run the sampling/training loop until `train_batches` batches have been
/// consumed. Tasks are cycled as needed.
pub fn run_orchestration<P: RolloutPolicy, E: Environment>(
    tasks: &[TaskRecord],
    policy: &P,
    env: &E,
    store: &mut TrajectoryStore,
    config: &OrchestratorConfig,
    clock: &VirtualClock,
) -> Result<OrchestrationReport, OrchestratorError> {
    assert!(!tasks.is_empty(), "task list must be non-empty");
    config.off_policy.validate()?;

    let mut coordinator = LeaseCoordinator::new();
    coordinator.request_phase(Phase::Sampling, clock.now_ms());

    let mut active: Vec<ActiveRollout> = Vec::new();
    let mut parked: VecDeque<ActiveRollout> = VecDeque::new();
    let mut next_task = 0usize;
    let mut next_id = 0u64;

    let mut batches_trained = 0;
    let mut staleness_violations = 0;
    let mut max_in_flight = 0;
    let mut checkpoint_resumes = 0;
    let mut weight_sum = 0.0;
    let mut weight_count = 0usize;

    while batches_trained < config.train_batches {
        match coordinator.holder() {
            Phase::Sampling => {
                let cap = config.sampler_count.min(config.target_concurrency);
                let admit = regulate_concurrency(cap, active.len());
                for _ in 0..admit {
                    if coordinator.begin_generation().is_err() {
                        break;
                    }
                    let rollout = match parked.pop_front() {
                        Some(r) => {
                            checkpoint_resumes += 1;
                            r
                        }
                        None => {
                            let task_index = next_task % tasks.len();
                            next_task += 1;
                            let id = format!("traj-{next_id:06}");
                            next_id += 1;
                            let trajectory = Trajectory::new(
                                id.clone(),
                                tasks[task_index].question.clone(),
                                coordinator.policy_version(),
                            );
                            store.append_event(&id, EventKind::RequestIssued, clock.now_ms())?;
                            ActiveRollout {
                                task_index,
                                trajectory,
                            }
                        }
                    };
                    active.push(rollout);
                }
                max_in_flight = max_in_flight.max(active.len());

                // One forward step per in-flight rollout.
                let mut still_active = Vec::with_capacity(active.len());
                for mut rollout in active.drain(..) {
                    match coordinator.forward_allowed() {
                        Err(LeaseError::LeaseRevoked) => {
                            // Checkpoint: the partial trajectory is the
                            // continuation; resumption replays nothing.
                            parked.push_back(rollout);
                            coordinator.end_generation(clock.now_ms());
                            continue;
                        }
                        Err(e) => unreachable!("forward outside sampling phase: {e}"),
                        Ok(()) => {}
                    }
                    let task = &tasks[rollout.task_index];
                    let decision =
                        policy.decide(task, &rollout.trajectory.id, rollout.trajectory.turns());
                    clock.advance(config.step_latency_ms);
                    match decision {
                        PolicyDecision::Invoke {
                            thought,
                            tool,
                            payload,
                        } => {
                            let observation = env.observe(&tool, &payload);
                            store.append_event(
                                &rollout.trajectory.id,
                                EventKind::ResponseReceived,
                                clock.now_ms(),
                            )?;
                            let index = rollout.trajectory.turns() + 1;
                            rollout
                                .trajectory
                                .append_step(Step {
                                    index,
                                    thought: Some(thought),
                                    action: ActionRecord::from_payload(tool, payload),
                                    observation: Some(observation),
                                })
                                .expect("index is contiguous by construction");
                            still_active.push(rollout);
                        }
                        PolicyDecision::Answer { text } => {
                            let correct =
                                normalize_answer(&text) == normalize_answer(&task.gold_answer);
                            rollout
                                .trajectory
                                .finalize(text)
                                .expect("active rollouts are unfinalized");
                            rollout
                                .trajectory
                                .set_reward(if correct { 1.0 } else { 0.0 })
                                .expect("finalized above");
                            store.append_trajectory(&rollout.trajectory)?;
                            store.append_event(
                                &rollout.trajectory.id,
                                EventKind::EnvFeedback,
                                clock.now_ms(),
                            )?;
                            store.append_event(
                                &rollout.trajectory.id,
                                EventKind::EvaluationOutcome,
                                clock.now_ms(),
                            )?;
                            coordinator.end_generation(clock.now_ms());
                        }
                    }
                }
                active = still_active;

                let fresh = store
                    .eligible_for_training(
                        coordinator.policy_version(),
                        config.off_policy.max_staleness,
                    )
                    .len();
                if fresh >= config.batch_size && !coordinator.revocation_pending() {
                    coordinator.request_phase(Phase::Training, clock.now_ms());
                }
            }
            Phase::Training => {
                let current = coordinator.policy_version();
                let batch = select_training_batch(
                    store,
                    current,
                    &config.off_policy,
                    config.batch_size,
                    clock.now_ms(),
                )?;
                for t in &batch {
                    if current.saturating_sub(t.policy_version) > config.off_policy.max_staleness {
                        staleness_violations += 1;
                    }
                    let w = clipped_is_weight(
                        policy.log_prob(&t.id, current),
                        policy.log_prob(&t.id, t.policy_version),
                        config.off_policy.clip_c,
                    )?;
                    weight_sum += w;
                    weight_count += 1;
                }
                batches_trained += 1;
                coordinator.bump_version().expect("holder is Training");
                coordinator.request_phase(Phase::Sampling, clock.now_ms());
            }
            Phase::None => {
                coordinator.request_phase(Phase::Sampling, clock.now_ms());
            }
        }
    }

    let successes = store.trajectories().filter(|s| s.trajectory.is_success()).count();
    Ok(OrchestrationReport {
        trajectories_stored: store.len(),
        batches_trained,
        final_version: coordinator.policy_version(),
        staleness_violations,
        max_in_flight,
        checkpoint_resumes,
        mean_is_weight: if weight_count == 0 {
            1.0
        } else {
            weight_sum / weight_count as f64
        },
        successes,
        transitions: coordinator.transitions().to_vec(),
    })
}

/// Generate the trajectory a policy would produce for `task` with no
/// interruptions; reference for checkpoint/resume determinism checks.
pub fn generate_uninterrupted<P: RolloutPolicy, E: Environment>(
    task: &TaskRecord,
    trajectory_id: &str,
    policy_version: u64,
    policy: &P,
    env: &E,
) -> Trajectory {
    let mut trajectory = Trajectory::new(trajectory_id, task.question.clone(), policy_version);
    loop {
        match policy.decide(task, trajectory_id, trajectory.turns()) {
            PolicyDecision::Invoke {
                thought,
                tool,
                payload,
            } => {
                let observation = env.observe(&tool, &payload);
                let index = trajectory.turns() + 1;
                trajectory
                    .append_step(Step {
                        index,
                        thought: Some(thought),
                        action: ActionRecord::from_payload(tool, payload),
                        observation: Some(observation),
                    })
                    .expect("contiguous");
            }
            PolicyDecision::Answer { text } => {
                let correct = normalize_answer(&text) == normalize_answer(&task.gold_answer);
                trajectory.finalize(text).expect("unfinalized");
                trajectory
                    .set_reward(if correct { 1.0 } else { 0.0 })
                    .expect("finalized");
                return trajectory;
            }
        }
    }
}
