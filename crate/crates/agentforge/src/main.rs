use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use agentforge::clock::VirtualClock;
use agentforge::denoise::{apply_denoise, DenoiseConfig};
use agentforge::gateway::{
    EchoBackend, FaultConfig, FaultInjectingBackend, Gateway, GatewayConfig, GatewayServer,
    ToolManifest, ToolRegistry,
};
use agentforge::harness::{
    emit_report, load_config, passk_csv, render_line_svg, run_eval, utilization_csv,
    BenchmarkAdapter, RunConfig,
};
use agentforge::merge::{
    merge_checkpoints, read_checkpoint, write_checkpoint, MergeConfig, SignConvention,
};
use agentforge::orchestrator::{run_orchestration, TrajectoryStore};
use agentforge::sim::{
    downsample_and_smooth, generate_golden_corpus, passk_experiment, run_pipeline_sim_with,
    GatewayEnv, LatencyModel, MockPolicy, Scheduler,
};
use agentforge::trajectory::{read_trace, write_trace, TaskRecord};

#[derive(Parser)]
#[command(
    name = "agentforge",
    version,
    about = "Agent-pipeline infrastructure toolkit: merging, denoising, gateway, orchestration, simulation, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge tuned checkpoints into a base checkpoint.
    Merge(MergeArgs),
    /// Filter a batch of finished trajectories before training.
    Denoise(DenoiseArgs),
    /// Tool gateway operations.
    Gateway {
        #[command(subcommand)]
        command: GatewayCommand,
    },
    /// Rollout orchestration.
    Orchestrate {
        #[command(subcommand)]
        command: OrchestrateCommand,
    },
    /// Workload simulations.
    Simulate {
        #[command(subcommand)]
        command: SimulateCommand,
    },
    /// Benchmark evaluation.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Regenerate the denoise golden corpus fixture.
    GoldenCorpus(GoldenCorpusArgs),
}

#[derive(Args)]
struct MergeArgs {
    /// Base checkpoint (.afck).
    #[arg(long)]
    base: PathBuf,
    /// One or more fine-tuned checkpoints.
    #[arg(long, required = true, num_args = 1..)]
    tuned: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    density: Option<f64>,
    /// Comma-separated per-source weights (default: uniform 1.0).
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// `task_vector` (default) or `base_minus_tuned`.
    #[arg(long)]
    sign_convention: Option<String>,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Input trajectories (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    /// Denoise config TOML (defaults used when absent).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kept trajectories (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Audit log (JSON).
    #[arg(long)]
    audit: PathBuf,
}

#[derive(Subcommand)]
enum GatewayCommand {
    /// Serve the JSON gateway over HTTP (POST /invoke).
    Serve {
        /// Directory of tool manifest TOML files.
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Fault-injection config TOML.
        #[arg(long)]
        faults: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OrchestrateCommand {
    /// Run the sampling/training loop from a run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Store log file (in-memory when absent).
        #[arg(long)]
        store: Option<PathBuf>,
        /// Task dataset JSONL (synthetic tasks when absent).
        #[arg(long)]
        tasks: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Compare device utilization between schedulers.
    Utilization {
        /// `sync` or `async`.
        #[arg(long)]
        scheduler: String,
        /// Latency spec, e.g. `lognormal:3,1.2`.
        #[arg(long)]
        latency: String,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        concurrency: usize,
        /// Per-step utilization CSV.
        #[arg(long)]
        csv: PathBuf,
        /// Optional SVG plot of the smoothed curve.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// pass@k curve for a Bernoulli-style mock policy.
    Passk {
        /// Per-rollout success probability.
        #[arg(long)]
        p: f64,
        /// Rollouts per task.
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 20)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Evaluate a JSONL benchmark with the configured mock policy.
    Run {
        /// Unified run config TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset override.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Rollouts per task.
        #[arg(long)]
        n: Option<u64>,
        /// Comma-separated k grid.
        #[arg(long)]
        k: Option<String>,
    },
}

#[derive(Args)]
struct GoldenCorpusArgs {
    #[arg(long, default_value_t = agentforge::sim::GOLDEN_CORPUS_SEED)]
    seed: u64,
    /// Corpus JSONL output.
    #[arg(long)]
    out: PathBuf,
    /// Expected-verdict table JSON output.
    #[arg(long)]
    verdicts: PathBuf,
}

fn env_seed() -> Option<u64> {
    std::env::var("AGENTFORGE_SEED").ok().and_then(|s| s.parse().ok())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("invalid {what} list {text:?}"))
}

/// Echo gateway over a synthetic single-tool registry; the standard
/// environment for CLI eval and pass@k runs.
fn echo_gateway() -> Gateway {
    let manifest = ToolManifest::from_toml(
        "name = \"search\"\nversion = \"1.0.0\"\ndescription = \"echo search\"\ninstance_count = 2\n",
    )
    .expect("static manifest is valid");
    let mut registry = ToolRegistry::new();
    registry.register(manifest).expect("fresh registry");
    let mut gateway = Gateway::new(registry, GatewayConfig::default(), VirtualClock::new());
    gateway.set_backend("search", Arc::new(EchoBackend));
    gateway
}

fn synthetic_tasks(n: usize) -> Vec<TaskRecord> {
    (0..n)
        .map(|i| TaskRecord {
            id: format!("task-{i:03}"),
            question: format!("synthetic question {i}"),
            gold_answer: format!("synthetic answer {i}"),
            metadata: Default::default(),
        })
        .collect()
}

fn cmd_merge(args: MergeArgs) -> Result<(), String> {
    let base = read_checkpoint(&args.base).map_err(|e| e.to_string())?;
    let tuned: Vec<_> = args
        .tuned
        .iter()
        .map(|p| read_checkpoint(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<_, _>>()?;
    let mut config = MergeConfig::with_sources(tuned.len());
    if let Some(lambda) = args.lambda {
        config.lambda = lambda;
    }
    if let Some(density) = args.density {
        config.density = density;
    }
    if let Some(weights) = &args.weights {
        config.weights = parse_list(weights, "weights")?;
    }
    config.seed = env_seed().or(args.seed).unwrap_or(config.seed);
    if let Some(convention) = &args.sign_convention {
        config.sign_convention = match convention.as_str() {
            "task_vector" => SignConvention::TaskVector,
            "base_minus_tuned" => SignConvention::BaseMinusTuned,
            other => return Err(format!("unknown sign convention {other:?}")),
        };
    }
    let merged = merge_checkpoints(&base, &tuned, &config).map_err(|e| e.to_string())?;
    write_checkpoint(&merged, &args.out).map_err(|e| e.to_string())?;
    println!(
        "merged {} source(s) into {} ({} tensors, lambda={}, density={}, seed={})",
        tuned.len(),
        args.out.display(),
        merged.tensors.len(),
        config.lambda,
        config.density,
        config.seed
    );
    Ok(())
}

fn cmd_denoise(args: DenoiseArgs) -> Result<(), String> {
    let batch = read_trace(&args.input).map_err(|e| e.to_string())?;
    let config = match &args.config {
        Some(path) => DenoiseConfig::from_toml(
            &std::fs::read_to_string(path).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?,
        None => DenoiseConfig::default(),
    };
    let outcome = apply_denoise(&batch, &config).map_err(|e| e.to_string())?;
    let kept: Vec<_> = outcome.kept.iter().map(|k| k.trajectory.clone()).collect();
    write_trace(&kept, &args.out).map_err(|e| e.to_string())?;
    std::fs::write(
        &args.audit,
        serde_json::to_string_pretty(&outcome.audit).expect("audit serializes"),
    )
    .map_err(|e| e.to_string())?;
    println!(
        "kept {} of {} trajectories ({} audit entries) -> {}, audit -> {}",
        kept.len(),
        batch.len(),
        outcome.audit.entries.len(),
        args.out.display(),
        args.audit.display()
    );
    Ok(())
}

fn cmd_gateway_serve(registry: PathBuf, port: u16, faults: Option<PathBuf>) -> Result<(), String> {
    let registry = ToolRegistry::from_dir(&registry).map_err(|e| e.to_string())?;
    let tool_names: Vec<String> = registry.tools().map(|m| m.name.clone()).collect();
    let mut gateway = Gateway::new(registry, GatewayConfig::default(), VirtualClock::new());
    let fault_config = match faults {
        Some(path) => Some(
            FaultConfig::from_toml(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    for name in tool_names {
        match &fault_config {
            Some(cfg) => gateway.set_backend(
                name,
                Arc::new(FaultInjectingBackend::new(EchoBackend, cfg.clone())),
            ),
            None => gateway.set_backend(name, Arc::new(EchoBackend)),
        }
    }
    let server = GatewayServer::spawn(Arc::new(gateway), port).map_err(|e| e.to_string())?;
    println!("gateway listening on http://{} (POST /invoke)", server.addr());
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}

fn cmd_orchestrate_run(
    config_path: PathBuf,
    store_path: Option<PathBuf>,
    tasks_path: Option<PathBuf>,
) -> Result<(), String> {
    let config = load_config(&config_path).map_err(|e| e.to_string())?;
    eprintln!("effective config:\n{}", config.echo());
    let tasks = match tasks_path {
        Some(path) => BenchmarkAdapter::exact_match("orchestrate", path)
            .load()
            .map_err(|e| e.to_string())?,
        None => synthetic_tasks(20),
    };
    let mut policy = config.eval.policy;
    if policy.seed == 0 {
        policy.seed = config.seed;
    }
    let mut store = match store_path {
        Some(path) => TrajectoryStore::open(path).map_err(|e| e.to_string())?,
        None => TrajectoryStore::in_memory(),
    };
    let env = agentforge::orchestrator::EchoEnv { latency_ms: 25 };
    let clock = VirtualClock::new();
    let report = run_orchestration(&tasks, &policy, &env, &mut store, &config.orchestrate, &clock)
        .map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

fn cmd_simulate_utilization(
    scheduler: String,
    latency: String,
    steps: usize,
    seed: u64,
    concurrency: usize,
    csv: PathBuf,
    svg: Option<PathBuf>,
) -> Result<(), String> {
    let scheduler = Scheduler::parse(&scheduler).map_err(|e| e.to_string())?;
    let latency = LatencyModel::parse(&latency).map_err(|e| e.to_string())?;
    let seed = env_seed().unwrap_or(seed);
    let series = run_pipeline_sim_with(scheduler, &latency, steps, seed, concurrency);
    std::fs::write(&csv, utilization_csv(&series)).map_err(|e| e.to_string())?;
    if let Some(svg_path) = svg {
        let smoothed = downsample_and_smooth(&series.values, 10, 5).map_err(|e| e.to_string())?;
        let points: Vec<(f64, f64)> = smoothed
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64, v))
            .collect();
        std::fs::write(
            &svg_path,
            render_line_svg(&points, "device utilization (smoothed)", "busy fraction"),
        )
        .map_err(|e| e.to_string())?;
    }
    println!(
        "{:?} scheduler, {steps} steps, mean utilization {:.4} -> {}",
        series.scheduler,
        series.mean(),
        csv.display()
    );
    Ok(())
}

fn cmd_simulate_passk(
    p: f64,
    n: u64,
    tasks: usize,
    seed: u64,
    csv: PathBuf,
    svg: Option<PathBuf>,
) -> Result<(), String> {
    if !(0.0..=1.0).contains(&p) {
        return Err(format!("p must be in [0,1], got {p}"));
    }
    let seed = env_seed().unwrap_or(seed);
    let policy = MockPolicy {
        success_prob: p,
        seed,
        ..MockPolicy::default()
    };
    let gateway = Arc::new(echo_gateway());
    let env = GatewayEnv::new(gateway);
    let k_grid: Vec<u64> = (0..)
        .map(|i| 1u64 << i)
        .take_while(|&k| k <= n)
        .chain(std::iter::once(n))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let curve = passk_experiment(&synthetic_tasks(tasks), &policy, n, &k_grid, &env);
    std::fs::write(&csv, passk_csv(&curve)).map_err(|e| e.to_string())?;
    if let Some(svg_path) = svg {
        let points: Vec<(f64, f64)> = curve.iter().map(|pt| (pt.k as f64, pt.value)).collect();
        std::fs::write(&svg_path, render_line_svg(&points, "pass@k", "pass@k"))
            .map_err(|e| e.to_string())?;
    }
    println!(
        "pass@k over {tasks} tasks, n={n}, p={p}: pass@1={:.4}, pass@{}={:.4} -> {}",
        curve.first().map(|pt| pt.value).unwrap_or(0.0),
        n,
        curve.last().map(|pt| pt.value).unwrap_or(0.0),
        csv.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval_run(
    config_path: Option<PathBuf>,
    dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    parallelism: Option<usize>,
    n: Option<u64>,
    k: Option<String>,
) -> Result<(), String> {
    let mut config = match config_path {
        Some(path) => load_config(&path).map_err(|e| e.to_string())?,
        None => {
            let mut c = RunConfig::default();
            c.output_dir = "out".into();
            if let Some(seed) = env_seed() {
                c.seed = seed;
            }
            c
        }
    };
    if let Some(dataset) = dataset {
        config.eval.dataset = dataset;
    }
    if let Some(out) = out {
        config.output_dir = out;
    }
    if let Some(par) = parallelism {
        config.eval.parallelism = par;
    }
    if let Some(n) = n {
        config.eval.n_samples = n;
    }
    if let Some(k) = k {
        config.eval.k_grid = parse_list(&k, "k")?;
    }
    if config.eval.dataset.as_os_str().is_empty() {
        return Err("no dataset: pass --dataset or set eval.dataset in the config".into());
    }
    eprintln!("effective config:\n{}", config.echo());

    let adapter = BenchmarkAdapter::exact_match("eval", &config.eval.dataset);
    let tasks = adapter.load().map_err(|e| e.to_string())?;
    let mut policy = config.eval.policy;
    if policy.seed == 0 {
        policy.seed = config.seed;
    }
    let gateway = Arc::new(echo_gateway());
    let env = GatewayEnv::new(gateway);
    let trace_dir = config.output_dir.join("traces");
    let report = run_eval(
        &adapter.name,
        &tasks,
        &policy,
        &env,
        config.eval.n_samples,
        &config.eval.k_grid,
        config.eval.parallelism,
        Some(&trace_dir),
    )
    .map_err(|e| e.to_string())?;
    let files = emit_report(&report, &config.output_dir).map_err(|e| e.to_string())?;
    println!(
        "evaluated {} tasks: accuracy {:.4}; wrote {} report files under {}",
        report.task_count,
        report.accuracy,
        files.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn cmd_golden_corpus(args: GoldenCorpusArgs) -> Result<(), String> {
    let corpus = generate_golden_corpus(args.seed);
    write_trace(&corpus.trajectories, &args.out).map_err(|e| e.to_string())?;
    std::fs::write(
        &args.verdicts,
        serde_json::to_string_pretty(&corpus.expected).expect("verdicts serialize"),
    )
    .map_err(|e| e.to_string())?;
    println!(
        "wrote {} trajectories -> {}, verdicts -> {}",
        corpus.trajectories.len(),
        args.out.display(),
        args.verdicts.display()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Merge(args) => cmd_merge(args),
        Command::Denoise(args) => cmd_denoise(args),
        Command::Gateway {
            command: GatewayCommand::Serve {
                registry,
                port,
                faults,
            },
        } => cmd_gateway_serve(registry, port, faults),
        Command::Orchestrate {
            command: OrchestrateCommand::Run {
                config,
                store,
                tasks,
            },
        } => cmd_orchestrate_run(config, store, tasks),
        Command::Simulate {
            command:
                SimulateCommand::Utilization {
                    scheduler,
                    latency,
                    steps,
                    seed,
                    concurrency,
                    csv,
                    svg,
                },
        } => cmd_simulate_utilization(scheduler, latency, steps, seed, concurrency, csv, svg),
        Command::Simulate {
            command: SimulateCommand::Passk {
                p,
                n,
                tasks,
                seed,
                csv,
                svg,
            },
        } => cmd_simulate_passk(p, n, tasks, seed, csv, svg),
        Command::Eval {
            command: EvalCommand::Run {
                config,
                dataset,
                out,
                parallelism,
                n,
                k,
            },
        } => cmd_eval_run(config, dataset, out, parallelism, n, k),
        Command::GoldenCorpus(args) => cmd_golden_corpus(args),
    };
    if let Err(message) = result {
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}
