//! End-to-end checks of the `agentforge` binary surface: exit codes, file
//! outputs, and error messaging.

use std::path::Path;
use std::process::Command;

use agentforge::merge::{read_checkpoint, write_checkpoint, Checkpoint, Tensor};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agentforge"))
}

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

#[test]
fn merge_subcommand_round_trips_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = Checkpoint::new();
    base.insert("w", Tensor::vector(vec![1.0, -2.0, 0.5]));
    let mut tuned = Checkpoint::new();
    tuned.insert("w", Tensor::vector(vec![2.0, -1.0, 0.5]));
    let base_path = dir.path().join("base.afck");
    let tuned_path = dir.path().join("tuned.afck");
    let out_path = dir.path().join("merged.afck");
    write_checkpoint(&base, &base_path).unwrap();
    write_checkpoint(&tuned, &tuned_path).unwrap();

    let output = bin()
        .args([
            "merge",
            "--base",
            base_path.to_str().unwrap(),
            "--tuned",
            tuned_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--epsilon-note", // placeholder replaced below
        ])
        .output()
        .unwrap();
    // `--epsilon-note` is not a real flag: clap must reject it.
    assert!(!output.status.success());

    let output = bin()
        .args([
            "merge",
            "--base",
            base_path.to_str().unwrap(),
            "--tuned",
            tuned_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let merged = read_checkpoint(&out_path).unwrap();
    // defaults: lambda 0.9, density 1.0 -> base + 0.9 * delta (eps ~ 0).
    let expected = [1.0 + 0.9, -2.0 + 0.9, 0.5];
    for (k, &e) in expected.iter().enumerate() {
        let got = f64::from(merged.tensors["w"].data[k]);
        assert!((got - e).abs() < 1e-6, "element {k}: {got} vs {e}");
    }
}

#[test]
fn denoise_subcommand_writes_kept_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let kept = dir.path().join("kept.jsonl");
    let audit = dir.path().join("audit.json");
    let output = bin()
        .args([
            "denoise",
            "--in",
            fixtures().join("golden_corpus.jsonl").to_str().unwrap(),
            "--config",
            fixtures().join("denoise.toml").to_str().unwrap(),
            "--out",
            kept.to_str().unwrap(),
            "--audit",
            audit.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let kept = agentforge::trajectory::read_trace(&kept).unwrap();
    // 30 trajectories minus the 4 extreme-length discards.
    assert_eq!(kept.len(), 26);
    let audit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&audit).unwrap()).unwrap();
    assert!(audit["entries"].as_array().unwrap().len() >= 12);
}

#[test]
fn simulate_subcommands_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let util = dir.path().join("util.csv");
    let status = bin()
        .args([
            "simulate",
            "utilization",
            "--scheduler",
            "sync",
            "--latency",
            "lognormal:3,1.2",
            "--steps",
            "100",
            "--csv",
            util.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&util).unwrap();
    assert!(csv.starts_with("step,utilization\n"));
    assert_eq!(csv.lines().count(), 101);

    let passk = dir.path().join("passk.csv");
    let status = bin()
        .args([
            "simulate", "passk", "--p", "0.5", "--n", "8", "--csv",
            passk.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&passk).unwrap();
    assert!(csv.starts_with("k,pass_at_k\n"));
}

#[test]
fn misspelled_config_key_gets_a_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[merge]\nlamda = 0.5\n").unwrap();
    let output = bin()
        .args(["orchestrate", "run", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("lamda"), "stderr: {stderr}");
    assert!(stderr.contains("lambda"), "stderr: {stderr}");
}

#[test]
fn seed_env_var_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let run = |out: &Path, seed: &str| {
        let status = bin()
            .env("AGENTFORGE_SEED", seed)
            .args([
                "simulate",
                "utilization",
                "--scheduler",
                "sync",
                "--latency",
                "lognormal:3,1.2",
                "--steps",
                "50",
                "--seed",
                "1",
                "--csv",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    run(&out_a, "7");
    run(&out_b, "8");
    // Same --seed flag, different env override: outputs must differ.
    assert_ne!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap()
    );
}
