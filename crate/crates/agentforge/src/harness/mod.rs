//! Configuration loading, benchmark adapters, the parallel evaluation
//! runner, and report emission behind the CLI.

mod adapter;
mod config;
mod eval;
mod report;

pub use adapter::{BenchmarkAdapter, HarnessError, Scoring};
pub use config::{
    load_config, parse_config, ConfigError, EvalSection, GatewaySection, MergeSection, RunConfig,
    SimulateSection, DEFAULTS,
};
pub use eval::{run_eval, EvalReport, TaskOutcome};
pub use report::{emit_report, passk_csv, per_task_csv, render_line_svg, utilization_csv};
