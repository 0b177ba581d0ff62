//! Mock policies, latency models, and discrete-event workload simulation.
//!
//! Everything here runs on the virtual clock and a counter-based generator,
//! so a (seed, config) pair pins the full event timeline: utilization
//! comparisons, pass@k curves, and the denoise golden corpus are all
//! reproducible byte for byte.

mod golden;
mod latency;
mod passk;
mod policy;
mod utilization;

pub use golden::{
    generate_golden_corpus, golden_config, ExpectedVerdict, GoldenCorpus, GOLDEN_CORPUS_SEED,
    GOLDEN_CORPUS_SIZE,
};
pub use latency::{LatencyModel, LatencyParseError};
pub use passk::{passk_experiment, GatewayEnv, PassKPoint};
pub use policy::{MockPolicy, PolicyConfigError};
pub use utilization::{
    downsample_and_smooth, run_pipeline_sim, run_pipeline_sim_with, Scheduler, SimError,
    UtilizationSeries, DEFAULT_SIM_CONCURRENCY,
};
