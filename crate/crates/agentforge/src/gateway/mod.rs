//! Fault-tolerant tool-invocation gateway.
//!
//! A versioned registry of TOML tool manifests fronts pools of in-process
//! backend instances. Dispatch applies parameter validation, rate limiting,
//! layered deadlines, bounded retries with exponential backoff, fallback
//! routing, and content truncation, and always returns the unified
//! success/error response schema. A fault-injection wrapper makes every
//! failure mode testable; all timing runs on the virtual clock.

mod backend;
mod dispatch;
mod http;
mod manifest;
mod pool;
mod protocol;
mod registry;
mod summarize;

pub use backend::{
    BackendReply, EchoBackend, FaultConfig, FaultInjectingBackend, FaultProfile, FnBackend,
    ToolBackend,
};
pub use dispatch::{
    truncate_content, AttemptEvent, DeadlineError, Gateway, GatewayConfig, LayeredDeadlines,
    TimeoutLayer,
};
pub use http::GatewayServer;
pub use manifest::{parse_semver, ManifestError, ParamSpec, ParamType, ToolManifest};
pub use pool::{InstancePool, InstanceState, PoolError, SchedulingStrategy};
pub use protocol::{ErrorCode, ResponseMetadata, Status, ToolRequest, ToolResponse};
pub use registry::{RegistryError, ToolRegistry};
pub use summarize::{summarize_tool, DEFAULT_SUMMARY_SENTENCES};
