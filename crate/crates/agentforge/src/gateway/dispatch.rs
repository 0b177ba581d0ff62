use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use super::backend::ToolBackend;
use super::pool::{InstancePool, SchedulingStrategy};
use super::protocol::{ErrorCode, ResponseMetadata, ToolRequest, ToolResponse};
use super::registry::ToolRegistry;
use crate::clock::VirtualClock;

#[derive(Debug, Error, PartialEq)]
pub enum DeadlineError {
    #[error("deadlines must satisfy tool <= server <= client (got {tool_ms}/{server_ms}/{client_ms})")]
    MisorderedDeadlines {
        tool_ms: u64,
        server_ms: u64,
        client_ms: u64,
    },
}

/// Which timeout layer tripped for a given elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeoutLayer {
    Tool,
    Server,
    Client,
}

/// Validated layered timeout configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayeredDeadlines {
    pub tool_ms: u64,
    pub server_ms: u64,
    pub client_ms: u64,
}

impl LayeredDeadlines {
    pub fn new(tool_ms: u64, server_ms: u64, client_ms: u64) -> Result<Self, DeadlineError> {
        if !(tool_ms <= server_ms && server_ms <= client_ms) {
            return Err(DeadlineError::MisorderedDeadlines {
                tool_ms,
                server_ms,
                client_ms,
            });
        }
        Ok(Self {
            tool_ms,
            server_ms,
            client_ms,
        })
    }

    /// Innermost layer exceeded by `elapsed_ms`, if any. The tool layer is
    /// judged per backend attempt, the server and client layers against
    /// total request time.
    pub fn classify(&self, elapsed_ms: u64) -> Option<TimeoutLayer> {
        if elapsed_ms > self.client_ms {
            Some(TimeoutLayer::Client)
        } else if elapsed_ms > self.server_ms {
            Some(TimeoutLayer::Server)
        } else if elapsed_ms > self.tool_ms {
            Some(TimeoutLayer::Tool)
        } else {
            None
        }
    }
}

impl Default for LayeredDeadlines {
    fn default() -> Self {
        Self {
            tool_ms: 110_000,
            server_ms: 120_000,
            client_ms: 180_000,
        }
    }
}

/// Cap text at `cap_tokens` whitespace-delimited tokens.
///
/// Untruncated text is returned unchanged byte-for-byte.
pub fn truncate_content(text: &str, cap_tokens: usize) -> (String, bool) {
    assert!(cap_tokens > 0, "cap_tokens must be positive");
    let count = text.split_whitespace().count();
    if count <= cap_tokens {
        return (text.to_string(), false);
    }
    let kept: Vec<&str> = text.split_whitespace().take(cap_tokens).collect();
    (kept.join(" "), true)
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub strategy: SchedulingStrategy,
    /// Backend attempts per instance selection.
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub deadlines: LayeredDeadlines,
    pub content_cap_tokens: usize,
    pub health_failure_threshold: u32,
    pub health_cooldown_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            strategy: SchedulingStrategy::RoundRobin,
            max_attempts: 3,
            backoff_base_ms: 1000,
            deadlines: LayeredDeadlines::default(),
            content_cap_tokens: 95_000,
            health_failure_threshold: 3,
            health_cooldown_ms: 30_000,
        }
    }
}

/// One backend attempt as seen by the dispatch trace.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptEvent {
    pub tool: String,
    pub instance_id: usize,
    pub started_at_ms: u64,
    pub latency_ms: u64,
    /// Ok(()) or the failing status code (0 for a tool-layer timeout).
    pub outcome: Result<(), u16>,
    /// Exponential-backoff delay inserted after this attempt, if any.
    pub backoff_after_ms: Option<u64>,
}

/// Simple token bucket keyed on virtual time.
#[derive(Debug, Clone)]
struct TokenBucket {
    qps: f64,
    burst: f64,
    tokens: f64,
    last_refill_ms: u64,
}

impl TokenBucket {
    fn new(qps: f64, now_ms: u64) -> Self {
        let burst = qps.ceil().max(1.0);
        Self {
            qps,
            burst,
            tokens: burst,
            last_refill_ms: now_ms,
        }
    }

    fn try_take(&mut self, now_ms: u64) -> bool {
        let elapsed_s = now_ms.saturating_sub(self.last_refill_ms) as f64 / 1000.0;
        self.tokens = (self.tokens + elapsed_s * self.qps).min(self.burst);
        self.last_refill_ms = now_ms;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            true
        } else {
            false
        }
    }
}

struct GatewayState {
    pools: BTreeMap<String, InstancePool>,
    buckets: BTreeMap<String, TokenBucket>,
}

/// The tool-invocation gateway: registry + pools + retry/fallback policy.
///
/// All timing is virtual; backoff and deadline behavior is exact and
/// deterministic under a fixed clock.
pub struct Gateway {
    registry: ToolRegistry,
    config: GatewayConfig,
    clock: VirtualClock,
    backends: BTreeMap<String, Arc<dyn ToolBackend>>,
    state: Mutex<GatewayState>,
}

impl Gateway {
    pub fn new(registry: ToolRegistry, config: GatewayConfig, clock: VirtualClock) -> Self {
        let now = clock.now_ms();
        let mut pools = BTreeMap::new();
        let mut buckets = BTreeMap::new();
        for manifest in registry.tools() {
            let key = pool_key(&manifest.name, &manifest.version);
            pools.insert(key.clone(), InstancePool::new(manifest.instance_count));
            if let Some(qps) = manifest.rate_limit_qps {
                buckets.insert(key, TokenBucket::new(qps, now));
            }
        }
        Self {
            registry,
            config,
            clock,
            backends: BTreeMap::new(),
            state: Mutex::new(GatewayState { pools, buckets }),
        }
    }

    /// Attach the backend serving every version of `tool_name`.
    pub fn set_backend(&mut self, tool_name: impl Into<String>, backend: Arc<dyn ToolBackend>) {
        self.backends.insert(tool_name.into(), backend);
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    /// Run a health pass over every pool, probing quarantined instances.
    pub fn health_tick(&self) {
        let now = self.clock.now_ms();
        let mut state = self.state.lock().expect("gateway state");
        for (key, pool) in state.pools.iter_mut() {
            let tool_name = key.split('@').next().unwrap_or(key);
            let backend = self.backends.get(tool_name).cloned();
            pool.health_tick(
                now,
                self.config.health_failure_threshold,
                self.config.health_cooldown_ms,
                |id| backend.as_ref().map(|b| b.probe(id)).unwrap_or(false),
            );
        }
    }

    pub fn dispatch(&self, request: &ToolRequest) -> ToolResponse {
        self.dispatch_traced(request).0
    }

    /// Dispatch with a full attempt-level trace for auditing and tests.
    pub fn dispatch_traced(&self, request: &ToolRequest) -> (ToolResponse, Vec<AttemptEvent>) {
        let started_at = self.clock.now_ms();
        let mut trace = Vec::new();

        let manifest = match self.registry.resolve(&request.tool, request.version.as_deref()) {
            Some(m) => m.clone(),
            None => {
                return (
                    ToolResponse::failure(
                        ErrorCode::ServiceUnavailable,
                        "unknown_tool",
                        format!("tool {:?} is not registered", request.tool),
                        ResponseMetadata::default(),
                    ),
                    trace,
                )
            }
        };

        // Schema check happens before any backend attempt.
        if let Err(detail) = manifest.check_params(&request.params) {
            return (
                ToolResponse::failure(
                    ErrorCode::InvalidParams,
                    "invalid_params",
                    detail,
                    ResponseMetadata::default(),
                ),
                trace,
            );
        }

        // Rate limit per tool version.
        let primary_key = pool_key(&manifest.name, &manifest.version);
        {
            let mut state = self.state.lock().expect("gateway state");
            if let Some(bucket) = state.buckets.get_mut(&primary_key) {
                if !bucket.try_take(started_at) {
                    return (
                        ToolResponse::failure(
                            ErrorCode::RateLimited,
                            "rate_limited",
                            format!("token bucket empty for {primary_key}"),
                            ResponseMetadata::default(),
                        ),
                        trace,
                    );
                }
            }
        }

        // Primary tool first, then fallbacks in manifest order.
        let mut chain = vec![manifest.clone()];
        for fallback in &manifest.fallbacks {
            if let Some(m) = self.registry.resolve(fallback, None) {
                chain.push(m.clone());
            }
        }

        let mut total_attempts = 0u32;
        for tool in &chain {
            match self.try_tool(tool, request, started_at, &mut total_attempts, &mut trace) {
                ToolOutcome::Success(response) => return (response, trace),
                ToolOutcome::GatewayTimeout => {
                    return (
                        ToolResponse::failure(
                            ErrorCode::Timeout,
                            "timeout",
                            "request deadline exceeded at the gateway",
                            ResponseMetadata {
                                attempts: total_attempts,
                                latency_ms: self.clock.now_ms() - started_at,
                                ..Default::default()
                            },
                        ),
                        trace,
                    )
                }
                ToolOutcome::Exhausted => continue,
            }
        }

        (
            ToolResponse::failure(
                ErrorCode::ServiceUnavailable,
                "service_unavailable",
                "primary pool and all fallbacks exhausted",
                ResponseMetadata {
                    attempts: total_attempts,
                    latency_ms: self.clock.now_ms() - started_at,
                    ..Default::default()
                },
            ),
            trace,
        )
    }

    fn try_tool(
        &self,
        tool: &super::manifest::ToolManifest,
        request: &ToolRequest,
        started_at: u64,
        total_attempts: &mut u32,
        trace: &mut Vec<AttemptEvent>,
    ) -> ToolOutcome {
        let key = pool_key(&tool.name, &tool.version);
        let backend = match self.backends.get(&tool.name) {
            Some(b) => Arc::clone(b),
            None => return ToolOutcome::Exhausted,
        };
        let deadlines = self.config.deadlines;
        let effective_server_ms = deadlines.server_ms.min(request.deadline_ms);

        // Bound instance selections by the healthy count on entry.
        let max_selections = {
            let state = self.state.lock().expect("gateway state");
            match state.pools.get(&key) {
                Some(pool) => pool.healthy_count(),
                None => return ToolOutcome::Exhausted,
            }
        };

        for _selection in 0..max_selections {
            let instance_id = {
                let mut state = self.state.lock().expect("gateway state");
                let pool = state.pools.get_mut(&key).expect("pool exists");
                match pool.schedule(self.config.strategy) {
                    Ok(id) => {
                        pool.instance_mut(id).in_flight += 1;
                        id
                    }
                    Err(_) => return ToolOutcome::Exhausted,
                }
            };

            let outcome =
                self.run_attempts(tool, &key, &backend, instance_id, request, started_at, effective_server_ms, total_attempts, trace);

            {
                let mut state = self.state.lock().expect("gateway state");
                let pool = state.pools.get_mut(&key).expect("pool exists");
                pool.instance_mut(instance_id).in_flight -= 1;
                // Quarantine without probing; restoration happens on
                // explicit health ticks.
                pool.health_tick(
                    self.clock.now_ms(),
                    self.config.health_failure_threshold,
                    self.config.health_cooldown_ms,
                    |_| false,
                );
            }

            match outcome {
                SelectionOutcome::Success(response) => return ToolOutcome::Success(response),
                SelectionOutcome::GatewayTimeout => return ToolOutcome::GatewayTimeout,
                SelectionOutcome::Failed => continue,
            }
        }
        ToolOutcome::Exhausted
    }

    #[allow(clippy::too_many_arguments)]
    fn run_attempts(
        &self,
        tool: &super::manifest::ToolManifest,
        key: &str,
        backend: &Arc<dyn ToolBackend>,
        instance_id: usize,
        request: &ToolRequest,
        started_at: u64,
        effective_server_ms: u64,
        total_attempts: &mut u32,
        trace: &mut Vec<AttemptEvent>,
    ) -> SelectionOutcome {
        let deadlines = self.config.deadlines;
        for attempt in 1..=self.config.max_attempts {
            *total_attempts += 1;
            let attempt_start = self.clock.now_ms();
            let reply = backend.invoke(instance_id, request);
            // Latency is charged to the virtual clock, capped at the tool
            // deadline: the instance layer gives up at tool_ms.
            let charged = reply.latency_ms.min(deadlines.tool_ms + 1);
            self.clock.advance(charged);

            let tool_timeout = reply.latency_ms > deadlines.tool_ms;
            let elapsed = self.clock.now_ms() - started_at;
            let gateway_timeout = elapsed > effective_server_ms;

            let attempt_outcome: Result<(), u16> = if tool_timeout {
                Err(0)
            } else {
                reply.outcome.as_ref().map(|_| ()).map_err(|&c| c)
            };

            let success = attempt_outcome.is_ok() && !gateway_timeout;
            let will_retry =
                !success && !gateway_timeout && attempt < self.config.max_attempts;
            let backoff_after_ms = will_retry
                .then(|| self.config.backoff_base_ms << (attempt - 1));

            trace.push(AttemptEvent {
                tool: tool.name.clone(),
                instance_id,
                started_at_ms: attempt_start,
                latency_ms: charged,
                outcome: attempt_outcome,
                backoff_after_ms,
            });

            {
                let mut state = self.state.lock().expect("gateway state");
                let pool = state.pools.get_mut(key).expect("pool exists");
                if success {
                    pool.record_success(instance_id);
                } else {
                    pool.record_failure(instance_id);
                }
            }

            if gateway_timeout {
                return SelectionOutcome::GatewayTimeout;
            }
            if success {
                let content = reply.outcome.expect("success");
                let (content, truncated) =
                    truncate_content(&content, self.config.content_cap_tokens);
                let metadata = ResponseMetadata {
                    attempts: *total_attempts,
                    instance_id: Some(format!("{}#{instance_id}", tool.name)),
                    latency_ms: self.clock.now_ms() - started_at,
                    truncated,
                    error_code: truncated.then_some(ErrorCode::ContentTruncated),
                    matched: None,
                };
                return SelectionOutcome::Success(ToolResponse::success(content, metadata));
            }
            if let Some(delay) = backoff_after_ms {
                self.clock.advance(delay);
            }
        }
        SelectionOutcome::Failed
    }
}

enum ToolOutcome {
    Success(ToolResponse),
    GatewayTimeout,
    Exhausted,
}

enum SelectionOutcome {
    Success(ToolResponse),
    GatewayTimeout,
    Failed,
}

fn pool_key(name: &str, version: &str) -> String {
    format!("{name}@{version}")
}
