use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::Deserialize;

use super::protocol::ToolRequest;
use crate::rng::DeterministicRng;
use crate::sim::LatencyModel;

/// What a backend instance did with one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    pub latency_ms: u64,
    /// Ok(content) or Err(http-style status code).
    pub outcome: Result<String, u16>,
}

/// An in-process tool backend behind the gateway wire schema.
///
/// Real MCP servers can be substituted later without protocol change; the
/// gateway only sees this trait.
pub trait ToolBackend: Send + Sync {
    fn invoke(&self, instance_id: usize, request: &ToolRequest) -> BackendReply;

    /// Health-check probe; defaults to alive.
    fn probe(&self, _instance_id: usize) -> bool {
        true
    }
}

/// Instant deterministic backend that echoes the request parameters.
#[derive(Debug, Default)]
pub struct EchoBackend;

impl ToolBackend for EchoBackend {
    fn invoke(&self, instance_id: usize, request: &ToolRequest) -> BackendReply {
        let params = serde_json::to_string(&request.params).unwrap_or_default();
        BackendReply {
            latency_ms: 0,
            outcome: Ok(format!("echo[{}#{instance_id}]: {params}", request.tool)),
        }
    }
}

/// Backend driven by a caller-supplied function; handy in tests.
pub struct FnBackend<F>(pub F);

impl<F> ToolBackend for FnBackend<F>
where
    F: Fn(usize, &ToolRequest) -> BackendReply + Send + Sync,
{
    fn invoke(&self, instance_id: usize, request: &ToolRequest) -> BackendReply {
        (self.0)(instance_id, request)
    }
}

/// Fault profile for one instance (or the pool default).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultProfile {
    /// Per-attempt probability of returning an error status.
    #[serde(default)]
    pub failure_prob: f64,
    /// Status-code menu drawn from uniformly on failure.
    #[serde(default = "default_status_menu")]
    pub status_codes: Vec<u16>,
    /// Latency distribution, e.g. `"constant:5"` or `"lognormal:3,1"`.
    #[serde(default)]
    pub latency: Option<String>,
    /// When false the instance also fails health probes.
    #[serde(default = "default_true")]
    pub probe_ok: bool,
}

fn default_status_menu() -> Vec<u16> {
    vec![500, 502, 503, 504]
}

fn default_true() -> bool {
    true
}

impl Default for FaultProfile {
    fn default() -> Self {
        Self {
            failure_prob: 0.0,
            status_codes: default_status_menu(),
            latency: None,
            probe_ok: true,
        }
    }
}

/// Fault-injection configuration: a default profile plus per-instance
/// overrides, loadable from a `faults.toml` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub default: FaultProfile,
    /// Keys are instance ids rendered as strings (TOML table keys).
    #[serde(default)]
    pub instance: BTreeMap<String, FaultProfile>,
}

impl FaultConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    fn profile(&self, instance_id: usize) -> &FaultProfile {
        self.instance
            .get(&instance_id.to_string())
            .unwrap_or(&self.default)
    }
}

/// Wraps an inner backend with programmable failures and latency.
pub struct FaultInjectingBackend<B> {
    inner: B,
    config: FaultConfig,
    rng: Mutex<DeterministicRng>,
}

impl<B: ToolBackend> FaultInjectingBackend<B> {
    pub fn new(inner: B, config: FaultConfig) -> Self {
        let rng = Mutex::new(DeterministicRng::new(config.seed));
        Self { inner, config, rng }
    }
}

impl<B: ToolBackend> ToolBackend for FaultInjectingBackend<B> {
    fn invoke(&self, instance_id: usize, request: &ToolRequest) -> BackendReply {
        let profile = self.config.profile(instance_id);
        let mut rng = self.rng.lock().expect("rng lock");
        let latency_ms = match &profile.latency {
            Some(spec) => {
                let model = LatencyModel::parse(spec).expect("validated on load");
                model.sample_ms(&mut rng)
            }
            None => 0,
        };
        if rng.bernoulli(profile.failure_prob) {
            let menu = &profile.status_codes;
            let code = menu[rng.below(menu.len() as u64) as usize];
            return BackendReply {
                latency_ms,
                outcome: Err(code),
            };
        }
        drop(rng);
        let mut reply = self.inner.invoke(instance_id, request);
        reply.latency_ms += latency_ms;
        reply
    }

    fn probe(&self, instance_id: usize) -> bool {
        self.config.profile(instance_id).probe_ok && self.inner.probe(instance_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> ToolRequest {
        ToolRequest {
            request_id: "r".into(),
            tool: "search".into(),
            version: None,
            params: BTreeMap::new(),
            deadline_ms: 180_000,
        }
    }

    #[test]
    fn echo_backend_is_instant_and_deterministic() {
        let b = EchoBackend;
        let a = b.invoke(0, &request());
        assert_eq!(a, b.invoke(0, &request()));
        assert_eq!(a.latency_ms, 0);
        assert!(a.outcome.unwrap().starts_with("echo[search#0]"));
    }

    #[test]
    fn fault_config_parses_from_toml() {
        let config = FaultConfig::from_toml(
            r#"
seed = 7

[default]
failure_prob = 0.4
status_codes = [502, 503]
latency = "constant:5"

[instance.2]
failure_prob = 1.0
probe_ok = false
"#,
        )
        .unwrap();
        assert_eq!(config.profile(0).failure_prob, 0.4);
        assert_eq!(config.profile(2).failure_prob, 1.0);
        assert!(!config.profile(2).probe_ok);
    }

    #[test]
    fn failure_rate_tracks_probability() {
        let mut config = FaultConfig::default();
        config.default.failure_prob = 0.4;
        config.seed = 11;
        let backend = FaultInjectingBackend::new(EchoBackend, config);
        let n = 10_000;
        let failures = (0..n)
            .filter(|_| backend.invoke(0, &request()).outcome.is_err())
            .count();
        let rate = failures as f64 / n as f64;
        assert!((rate - 0.4).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn injected_status_codes_come_from_menu() {
        let mut config = FaultConfig::default();
        config.default.failure_prob = 1.0;
        config.default.status_codes = vec![502, 503];
        let backend = FaultInjectingBackend::new(EchoBackend, config);
        for _ in 0..100 {
            match backend.invoke(0, &request()).outcome {
                Err(code) => assert!(code == 502 || code == 503),
                Ok(_) => panic!("expected failure"),
            }
        }
    }
}
