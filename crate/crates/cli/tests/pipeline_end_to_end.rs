//! Drives the pipeline in-process on a small synthetic dataset and checks
//! artifact layout, caching, reproducibility, and exit-code behavior.

use std::path::{Path, PathBuf};

use senselabel::config::Overrides;
use senselabel::{run_command, Command};
use senselabel_core::llm::read_annotation_log;
use senselabel_core::prompt::ResponseOutcome;
use senselabel_core::synth::{generate, write_generic_csv, ClassSpec, SynthConfig};

fn tiny_dataset(dir: &Path) -> PathBuf {
    let class = |name: &str, freq: f64, dc: [f64; 3]| ClassSpec {
        name: name.into(),
        base_freq_hz: freq,
        amplitude: 1.0,
        noise_sigma: 0.2,
        dc_offset: dc,
    };
    let config = SynthConfig {
        classes: vec![
            class("alpha", 2.0, [3.0, 0.0, 9.8]),
            class("beta", 8.0, [-3.0, 0.0, 9.8]),
        ],
        subjects: (1..=4).map(|i| format!("s{i:02}")).collect(),
        seconds_per_recording: 10.0,
        sample_rate_hz: 50.0,
        seed: 11,
    };
    let recordings = generate(&config).expect("valid synth config");
    let path = dir.join("data.csv");
    write_generic_csv(&path, &recordings).expect("csv written");
    path
}

fn base_config(out_dir: &str) -> String {
    format!(
        r#"
[run]
out_dir = "{out_dir}"

[dataset]
adapter = "generic-csv"
path = "data.csv"
test_subjects = ["s04"]
classes = ["alpha", "beta"]

[ssl]
mode = "random"

[projection]
method = "pca"
dims = [2]

[annotate]
backend = "oracle"
metrics = ["euclidean"]
example_counts = [3]

[seeds]
pretrain = 7
projection = 8
selection = 9
"#
    )
}

fn write_run_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn evaluate_produces_all_artifacts_and_reruns_are_cached() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let config_path = write_run_config(dir.path(), &base_config("out"));

    let resolved = run_command(Command::Evaluate, &config_path, &Overrides::default()).unwrap();
    let run_dir = resolved.run_dir.clone();

    for rel in [
        "data/train_windows.jsonl",
        "data/test_windows.jsonl",
        "data/channel_stats.json",
        "data/ground_truth.csv",
        "model/model.bin",
        "model/train_log.csv",
        "embeddings/train.jsonl",
        "embeddings/test.jsonl",
        "projections/pca_d02.jsonl",
        "projections/pca_d02.meta.json",
        "cells/d02_euclidean_k03/prompts.jsonl",
        "cells/d02_euclidean_k03/annotations.jsonl",
        "cells/d02_euclidean_k03/report.json",
        "cells/d02_euclidean_k03/confusion.csv",
        "cells/d02_euclidean_k03/metrics.csv",
        "cells/d02_euclidean_k03/confusion.svg",
        "manifest.json",
    ] {
        assert!(run_dir.join(rel).exists(), "missing artifact {rel}");
    }

    let manifest_before = std::fs::read(run_dir.join("manifest.json")).unwrap();
    let report_before = std::fs::read(run_dir.join("cells/d02_euclidean_k03/report.json")).unwrap();

    // A second invocation re-runs nothing and rewrites identical bytes.
    run_command(Command::Evaluate, &config_path, &Overrides::default()).unwrap();
    assert_eq!(
        manifest_before,
        std::fs::read(run_dir.join("manifest.json")).unwrap()
    );
    assert_eq!(
        report_before,
        std::fs::read(run_dir.join("cells/d02_euclidean_k03/report.json")).unwrap()
    );

    let records = read_annotation_log(&run_dir.join("cells/d02_euclidean_k03/annotations.jsonl"))
        .unwrap();
    assert!(!records.is_empty());
    assert!(records
        .iter()
        .all(|r| matches!(r.parsed.outcome, ResponseOutcome::Label(_))));
}

#[test]
fn identical_configs_reproduce_runs_bit_for_bit_across_directories() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    tiny_dataset(dir_a.path());
    tiny_dataset(dir_b.path());
    let config_a = write_run_config(dir_a.path(), &base_config("out"));
    let config_b = write_run_config(dir_b.path(), &base_config("out"));

    let run_a = run_command(Command::Evaluate, &config_a, &Overrides::default()).unwrap();
    let run_b = run_command(Command::Evaluate, &config_b, &Overrides::default()).unwrap();
    assert_eq!(run_a.run_id, run_b.run_id);

    for rel in [
        "manifest.json",
        "cells/d02_euclidean_k03/annotations.jsonl",
        "cells/d02_euclidean_k03/report.json",
        "projections/pca_d02.jsonl",
    ] {
        let a = std::fs::read(run_a.run_dir.join(rel)).unwrap();
        let b = std::fs::read(run_b.run_dir.join(rel)).unwrap();
        assert_eq!(a, b, "artifact {rel} differs between identical runs");
    }
}

#[test]
fn mock_backend_runs_deterministically() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    tiny_dataset(dir_a.path());
    tiny_dataset(dir_b.path());
    let config_a = write_run_config(dir_a.path(), &base_config("out"));
    let config_b = write_run_config(dir_b.path(), &base_config("out"));
    let overrides = Overrides {
        backend: Some("mock".into()),
        ..Overrides::default()
    };

    let run_a = run_command(Command::Annotate, &config_a, &overrides).unwrap();
    let run_b = run_command(Command::Annotate, &config_b, &overrides).unwrap();

    let rel = "cells/d02_euclidean_k03/annotations.jsonl";
    let a = std::fs::read(run_a.run_dir.join(rel)).unwrap();
    let b = std::fs::read(run_b.run_dir.join(rel)).unwrap();
    assert_eq!(a, b);

    let records = read_annotation_log(&run_a.run_dir.join(rel)).unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r.attempt_count == 1));
    // The mock cycles over the class names, so both labels appear.
    let labels: std::collections::BTreeSet<String> = records
        .iter()
        .map(|r| r.response_text.clone())
        .collect();
    assert_eq!(labels.len(), 2);
}

#[test]
fn grid_sweeps_every_cell_and_writes_a_reproducible_summary() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let body = base_config("out")
        + r#"
[grid]
workers = 3
"#;
    let config_path = write_run_config(dir.path(), &body);
    let overrides = Overrides {
        dims: Some(vec![2, 3]),
        metrics: Some(vec!["euclidean".into(), "cosine".into()]),
        example_counts: Some(vec![1, 3]),
        ..Overrides::default()
    };

    let resolved = run_command(Command::Grid, &config_path, &overrides).unwrap();
    let run_dir = resolved.run_dir.clone();

    for dim in [2, 3] {
        for metric in ["euclidean", "cosine"] {
            for k in [1, 3] {
                let rel = format!("cells/d{dim:02}_{metric}_k{k:02}/report.json");
                assert!(run_dir.join(&rel).exists(), "missing {rel}");
            }
        }
    }

    let summary_text = std::fs::read_to_string(run_dir.join("grid_summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&summary_text).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 8);
    // One consistency curve per (dim, metric) pair, two points each.
    let consistency = summary["consistency"].as_array().unwrap();
    assert_eq!(consistency.len(), 4);
    assert!(consistency
        .iter()
        .all(|row| row["points"].as_array().unwrap().len() == 2));

    let csv = std::fs::read_to_string(run_dir.join("grid_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);

    // Re-running the grid rewrites identical summary bytes.
    let json_before = std::fs::read(run_dir.join("grid_summary.json")).unwrap();
    run_command(Command::Grid, &config_path, &overrides).unwrap();
    assert_eq!(
        json_before,
        std::fs::read(run_dir.join("grid_summary.json")).unwrap()
    );
}

#[test]
fn changed_selection_seed_invalidates_annotation_stages_only() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let config_path = write_run_config(dir.path(), &base_config("out"));
    let overrides = Overrides {
        run_id: Some("pinned".into()),
        ..Overrides::default()
    };
    run_command(Command::Evaluate, &config_path, &overrides).unwrap();

    let body = base_config("out").replace("selection = 9", "selection = 10");
    std::fs::write(&config_path, body).unwrap();
    let run_dir = run_command(Command::Evaluate, &config_path, &overrides)
        .unwrap()
        .run_dir;

    // The model stamp survived the seed change; the annotate stamp changed.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seeds"]["selection"], 10);
    assert!(manifest["stages"]["pretrain"].is_object());
    assert!(manifest["stages"]["annotate_d02_euclidean_k03"].is_object());
}

#[test]
fn binary_reports_config_errors_on_one_line_with_exit_2() {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_senselabel"))
        .args(["--config", "/nonexistent/senselabel.toml", "ingest"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error code=2 stage=config message="));
}

#[test]
fn binary_runs_the_pipeline_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let config_path = write_run_config(dir.path(), &base_config("out"));
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_senselabel"))
        .args(["--config", config_path.to_str().unwrap(), "evaluate"])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("stage ingest: ran"));
    assert!(stdout.contains("run run-"));
}

#[test]
fn unknown_class_in_config_fails_at_stage_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    tiny_dataset(dir.path());
    let body = base_config("out").replace("\"alpha\", \"beta\"", "\"alpha\", \"gamma\"");
    let config_path = write_run_config(dir.path(), &body);
    let err = run_command(Command::Evaluate, &config_path, &Overrides::default()).unwrap_err();
    // No test window carries class "gamma", so the split has no test side.
    assert_eq!(err.exit_code(), 3);
}
