use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chaosnet::integrator::{Dataset, NormStats};

fn chaosnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaosnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// Small but complete pipeline config.
const SMALL: &str = r#"{
  "system": {"steps": 3000},
  "train": {"epochs": 30, "learning_rate": 0.001},
  "run": {"iterations": 1000},
  "codegen": {"iterations": 200}
}"#;

fn project(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), config).unwrap();
    dir
}

fn step(dir: &Path, cmd: &str) -> Output {
    ok(chaosnet(dir, &["--config", "cfg.json", "--out", "o", cmd]))
}

#[test]
fn dataset_reports_pair_counts() {
    let dir = project(r#"{"system": {"steps": 10}}"#);
    let out = stdout(&step(dir.path(), "dataset"));
    assert!(out.contains("pairs: 10 (8 train / 2 test)"), "{out}");
    let bytes = fs::read(dir.path().join("o/dataset.bin")).unwrap();
    let ds = Dataset::read_from(&bytes[..]).unwrap();
    assert_eq!(ds.len(), 10);
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("o/dataset.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["system"]["steps"], 10);
    assert_eq!(manifest["result"]["train"], 8);
}

#[test]
fn invalid_config_fails_before_side_effects() {
    let dir = project(r#"{"system": {"name": "duffing"}}"#);
    let o = chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--out", "o", "dataset"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duffing"));
    assert!(!dir.path().join("o").exists());

    let dir = project(r#"{"train": {"hidden": 6}}"#);
    let o = chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--out", "o", "explore"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("o").exists());

    let dir = project("{ not json");
    assert_eq!(
        chaosnet(dir.path(), &["--config", "cfg.json", "dataset"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        chaosnet(dir.path(), &["--config", "missing.json", "dataset"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(chaosnet(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        chaosnet(dir.path(), &["--jobs", "0", "explore"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(chaosnet(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn missing_inputs_are_validation_errors() {
    let dir = project(SMALL);
    for cmd in ["train", "codegen", "run", "randtest"] {
        let o = chaosnet(dir.path(), &["--config", "cfg.json", "--out", "o", cmd]);
        assert_eq!(o.status.code(), Some(1), "{cmd}");
    }
}

#[test]
fn full_pipeline_is_reproducible() {
    let a = project(SMALL);
    let b = project(SMALL);
    let mut metrics = Vec::new();
    for dir in [&a, &b] {
        step(dir.path(), "dataset");
        let t = stdout(&step(dir.path(), "train"));
        metrics.push(
            t.lines()
                .filter(|l| l.starts_with("test"))
                .map(str::to_owned)
                .collect::<Vec<_>>(),
        );
        step(dir.path(), "codegen");
        step(dir.path(), "run");
    }
    assert_eq!(metrics[0], metrics[1]);
    assert_eq!(metrics[0].len(), 4);
    for f in [
        "dataset.bin",
        "model.json",
        "sequence.csv",
        "bits.bin",
        "hls/chaos_osc.cpp",
        "hls/chaos_osc_tb.cpp",
        "hls/manifest.json",
    ] {
        let x = fs::read(a.path().join("o").join(f)).unwrap();
        let y = fs::read(b.path().join("o").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }

    let csv = fs::read_to_string(a.path().join("o/sequence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    assert!(csv.starts_with("iteration,x1,x2,x3\n1,"));
    assert_eq!(
        fs::read(a.path().join("o/bits.bin")).unwrap().len(),
        24_000 / 8
    );

    let o = step(a.path(), "randtest");
    let text = stdout(&o);
    let json_start = text.find('{').unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for r in reports {
        if let Some(p) = r["p_value"].as_f64() {
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(r["n"], 24_000);
        }
    }
}

#[test]
fn seed_flag_changes_training() {
    let dir = project(SMALL);
    step(dir.path(), "dataset");
    step(dir.path(), "train");
    let first = fs::read(dir.path().join("o/model.json")).unwrap();
    ok(chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--out", "o", "--seed", "7", "train"],
    ));
    let second = fs::read(dir.path().join("o/model.json")).unwrap();
    assert_ne!(first, second);
    let model: serde_json::Value = serde_json::from_slice(&second).unwrap();
    assert_eq!(model["rng_seed"], 7);
}

#[test]
fn train_rejects_mismatched_dataset() {
    let dir = project(SMALL);
    let ds = Dataset::new(
        2,
        vec![NormStats::IDENTITY; 2],
        3,
        vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    );
    fs::create_dir_all(dir.path().join("o")).unwrap();
    let mut bytes = Vec::new();
    ds.write_to(&mut bytes).unwrap();
    fs::write(dir.path().join("o/dataset.bin"), bytes).unwrap();
    let o = chaosnet(dir.path(), &["--config", "cfg.json", "--out", "o", "train"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not fit"));
    assert!(!dir.path().join("o/model.json").exists());
}

fn explore_rows(config: &str) -> Vec<String> {
    let dir = project(config);
    let out = stdout(&step(dir.path(), "explore"));
    let csv = fs::read_to_string(dir.path().join("o/explore.csv")).unwrap();
    assert!(out.contains("network"));
    csv.lines().skip(1).map(str::to_owned).collect()
}

#[test]
fn explore_selections() {
    let rows = explore_rows("{}");
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("3,8,0,with_dsp,1,1,"));

    let rows = explore_rows(r#"{"dse": {"selection": "min_cost"}}"#);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("3,8,0,"));

    let rows = explore_rows(r#"{"dse": {"selection": "min_latency"}}"#);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("3,8,3,"));

    assert_eq!(explore_rows(r#"{"dse": {"selection": "pareto"}}"#).len(), 4);

    let rows = explore_rows(r#"{"dse": {"sweep_hidden": [4, 16], "mode": "no_dsp"}}"#);
    assert_eq!(rows.len(), 3 + 4 + 5);
    assert!(rows
        .iter()
        .all(|r| r.contains(",no_dsp,") && r.ends_with(",0")));
}

#[test]
fn explore_parallel_matches_sequential() {
    let cfg = r#"{"dse": {"sweep_hidden": [2, 4, 16]}}"#;
    let a = project(cfg);
    let b = project(cfg);
    ok(chaosnet(
        a.path(),
        &[
            "--config", "cfg.json", "--out", "o", "--jobs", "1", "explore",
        ],
    ));
    ok(chaosnet(
        b.path(),
        &[
            "--config", "cfg.json", "--out", "o", "--jobs", "4", "explore",
        ],
    ));
    assert_eq!(
        fs::read(a.path().join("o/explore.csv")).unwrap(),
        fs::read(b.path().join("o/explore.csv")).unwrap()
    );
}

#[test]
fn explore_beyond_the_coefficient_table_fails_cleanly() {
    let dir = project(r#"{"dse": {"sweep_hidden": [32]}}"#);
    let o = chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--out", "o", "explore"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("P = 5"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn codegen_respects_force_and_selection() {
    let dir = project(
        r#"{"system": {"steps": 500}, "train": {"epochs": 2}, "codegen": {"p": 0, "iterations": 10, "core_name": "osc"}}"#,
    );
    step(dir.path(), "dataset");
    step(dir.path(), "train");
    let out = stdout(&step(dir.path(), "codegen"));
    assert!(out.contains("design: P=0 (1 multipliers, 1 adders"));
    let core = dir.path().join("o/hls/osc.cpp");
    let before = fs::read(&core).unwrap();

    let o = chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--out", "o", "codegen"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("already exists"));

    ok(chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--out", "o", "--force", "codegen"],
    ));
    assert_eq!(fs::read(&core).unwrap(), before);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/hls/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["p"], 0);
    assert_eq!(manifest["config"]["codegen"]["core_name"], "osc");
    assert_eq!(manifest["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn randtest_on_short_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("few.bin"), [0xA5u8; 4]).unwrap();
    let o = chaosnet(
        dir.path(),
        &["--out", "o", "randtest", "--input", "few.bin"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("n/a"));
}

#[test]
fn randtest_bit_count_truncates() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("alt.bin"), [0x55u8; 250]).unwrap();
    let o = ok(chaosnet(
        dir.path(),
        &[
            "--out",
            "o",
            "randtest",
            "--input",
            "alt.bin",
            "--bit-count",
            "1000",
        ],
    ));
    let text = stdout(&o);
    assert!(text.contains("monobit"));
    let doc: serde_json::Value = serde_json::from_str(&text[text.find('{').unwrap()..]).unwrap();
    assert_eq!(doc["reports"][0]["n"], 1000);
    assert_eq!(doc["reports"][0]["p_value"], 1.0);
    let o = chaosnet(
        dir.path(),
        &[
            "--out",
            "o",
            "randtest",
            "--input",
            "alt.bin",
            "--bit-count",
            "5000",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fit_writes_a_loadable_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.csv"), chaosnet::dse::REFERENCE_ESTIMATES).unwrap();
    ok(chaosnet(dir.path(), &["--out", "o", "fit", "m.csv"]));
    let text = fs::read_to_string(dir.path().join("o/coefficients.json")).unwrap();
    let table = chaosnet::dse::CoefficientTable::from_json(&text).unwrap();
    let builtin = chaosnet::dse::CoefficientTable::builtin();
    for mode in chaosnet::dse::DspMode::ALL {
        let (a, b) = (
            table.latency(mode).as_array(),
            builtin.latency(mode).as_array(),
        );
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0), "{x} vs {y}");
        }
    }
    let cfg = r#"{"dse": {"coefficients": "o/coefficients.json"}}"#;
    fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    ok(chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--out", "o2", "explore"],
    ));

    fs::write(dir.path().join("bad.csv"), "I,H,P\n1,2,3\n").unwrap();
    assert_eq!(
        chaosnet(dir.path(), &["fit", "bad.csv"]).status.code(),
        Some(1)
    );
}

#[test]
fn config_subcommand_prints_effective_defaults() {
    let dir = project(r#"{"train": {"hidden": 16}}"#);
    let o = ok(chaosnet(
        dir.path(),
        &["--config", "cfg.json", "--seed", "9", "config"],
    ));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["train"]["hidden"], 16);
    assert_eq!(v["train"]["seed"], 9);
    assert_eq!(v["system"]["steps"], 100_000);
    assert_eq!(v["dataset"]["split_ratio"], 0.8);
}

#[test]
fn default_run_trains_to_high_r2() {
    let dir = project("{}");
    let out = stdout(&step(dir.path(), "dataset"));
    assert!(
        out.contains("pairs: 100000 (80000 train / 20000 test)"),
        "{out}"
    );
    let out = stdout(&step(dir.path(), "train"));
    let r2: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("test R2"))
        .and_then(|v| v.trim().parse().ok())
        .expect("R2 line");
    assert!(r2 >= 0.99, "{out}");
}
