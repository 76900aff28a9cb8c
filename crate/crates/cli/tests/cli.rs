use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use softblend::gp::log_marginal_likelihood;
use softblend::harness::io::load_model;

const SMALL: &str = r#"
[excitation]
duration = 30.0

[collection]
samples = 40

[training]
restarts = 2
"#;

const STILL: &str = r#"
[robot]
segments = 1
gravity = 0.0

[excitation]
duration = 30.0

[collection]
samples = 30
estimated_model = "rigid-inverse"

[training]
restarts = 1
"#;

fn softblend(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softblend"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {text}"))
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn data_rows(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).count() - 1
}

fn with_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// collect + train on the small config; returns the model path.
fn small_model(dir: &Path) -> String {
    let cfg = with_config(dir, SMALL);
    ok(softblend(dir, &["--config", &cfg, "collect", "--out", "d.csv"]));
    ok(softblend(dir, &["--config", &cfg, "train", "--dataset", "d.csv", "--out", "m.json"]));
    "m.json".into()
}

#[test]
fn default_collection_has_250_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(softblend(dir.path(), &["collect", "--out", "data.csv"]));
    assert_eq!(stdout_json(&out)["rows"], 250);
    assert_eq!(data_rows(&dir.path().join("data.csv")), 250);
    let header = fs::read_to_string(dir.path().join("data.csv"))
        .unwrap()
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .to_string();
    assert_eq!(header, "time,ydd,yd,y,p_1,p_2,p_3,target_1,target_2,target_3");
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("data.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "collect");
}

#[test]
fn zero_duration_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = softblend(dir.path(), &["collect", "--duration", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("excitation.duration"));
    assert!(out.stdout.is_empty());
}

#[test]
fn same_seed_gives_byte_identical_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), SMALL);
    for name in ["a.csv", "b.csv"] {
        ok(softblend(dir.path(), &["--config", &cfg, "--seed", "11", "collect", "--out", name]));
    }
    ok(softblend(dir.path(), &["--config", &cfg, "--seed", "12", "collect", "--out", "c.csv"]));
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), SMALL);
    ok(softblend(dir.path(), &["--config", &cfg, "collect", "--samples", "25", "--out", "d.csv"]));
    assert_eq!(data_rows(&dir.path().join("d.csv")), 25);
}

#[test]
fn single_point_dataset_trains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), SMALL);
    ok(softblend(dir.path(), &["--config", &cfg, "collect", "--samples", "1", "--out", "one.csv"]));
    let out = ok(softblend(dir.path(), &["--config", &cfg, "train", "--dataset", "one.csv", "--out", "one.json"]));
    assert!(stdout_json(&out)["log_marginal_likelihood"].as_f64().unwrap().is_finite());
    assert_eq!(load_model(&dir.path().join("one.json"), None).unwrap().gp.dataset().len(), 1);
}

#[test]
fn reported_likelihood_matches_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), SMALL);
    ok(softblend(dir.path(), &["--config", &cfg, "collect", "--out", "d.csv"]));
    let out = ok(softblend(dir.path(), &["--config", &cfg, "train", "--dataset", "d.csv", "--out", "m.json"]));
    let reported = stdout_json(&out)["log_marginal_likelihood"].as_f64().unwrap();
    let model = load_model(&dir.path().join("m.json"), None).unwrap();
    let recomputed = log_marginal_likelihood(model.gp.dataset(), model.gp.hyperparameters()).unwrap().value;
    assert!((reported - recomputed).abs() <= 1e-10, "{reported} vs {recomputed}");
}

#[test]
fn zero_amplitude_hold_reports_no_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), STILL);
    ok(softblend(dir.path(), &["--config", &cfg, "collect", "--out", "d.csv"]));
    ok(softblend(dir.path(), &["--config", &cfg, "train", "--dataset", "d.csv", "--out", "m.json"]));
    let out = ok(softblend(
        dir.path(),
        &["--config", &cfg, "track", "--model", "m.json", "--offset", "0", "--amplitude", "0", "--duration", "5", "--out", "t.csv"],
    ));
    let rms = stdout_json(&out)["metrics"]["rms_error"].as_f64().unwrap();
    assert!(rms < 1e-9, "rms {rms}");
}

#[test]
fn track_probe_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let cfg = dir.path().join("config.toml").display().to_string();
    let run = |args: &[&str]| {
        let mut full = vec!["--config", cfg.as_str()];
        full.extend_from_slice(args);
        ok(softblend(dir.path(), &full))
    };
    run(&["track", "--model", &model, "--duration", "6", "--out", "in.csv"]);
    run(&["track", "--model", &model, "--duration", "6", "--mirrored", "--out", "out.csv"]);
    let probe = run(&["probe", "--model", &model, "--torque", "0", "--out", "p0.json"]);
    assert_eq!(stdout_json(&probe)["compliance_ratio"], "undefined");

    let report = run(&["report", "--log", "in.csv", "--log", "out.csv", "--probe", "p0.json", "--out", "r.csv"]);
    let table = String::from_utf8(report.stdout).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0][0], "source");
    let col = rows[0].iter().position(|c| *c == "mean_alpha").unwrap();
    let alpha = |r: usize| rows[r][col].parse::<f64>().unwrap();
    assert!(alpha(1) < alpha(2), "in {} vs out {}", alpha(1), alpha(2));
    assert_eq!(*rows[3].last().unwrap(), "undefined");

    let plot = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(plot.starts_with("source,time,y_desired,y_actual,alpha\n"));
    assert_eq!(plot.lines().count(), 1 + 2 * 6000);
}

#[test]
fn missing_model_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = softblend(dir.path(), &["track", "--model", "absent.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = softblend(dir.path(), &["probe", "--model", "absent.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn model_from_another_robot_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let other = dir.path().join("other.toml");
    fs::write(&other, format!("{SMALL}\n[robot]\nsegment_mass = 0.08\n")).unwrap();
    let out = softblend(dir.path(), &["--config", other.to_str().unwrap(), "track", "--model", &model]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
}

#[test]
fn bad_inputs_map_to_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = with_config(dir.path(), "[robot]\nsegmnets = 2\n");
    assert_eq!(softblend(dir.path(), &["--config", &bad, "collect"]).status.code(), Some(1));
    assert_eq!(softblend(dir.path(), &["--config", "nowhere.toml", "collect"]).status.code(), Some(1));
    assert_eq!(softblend(dir.path(), &["collect", "--samples", "many"]).status.code(), Some(1));
    assert_eq!(softblend(dir.path(), &["frobnicate"]).status.code(), Some(1));

    fs::write(dir.path().join("junk.csv"), "not a dataset\n").unwrap();
    assert_eq!(softblend(dir.path(), &["train", "--dataset", "junk.csv"]).status.code(), Some(1));

    let cfg = with_config(dir.path(), SMALL);
    let out = softblend(dir.path(), &["--config", &cfg, "collect", "--out", "no/such/dir/d.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn diverging_run_exits_two_with_partial_log() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_model(dir.path());
    let wild = dir.path().join("wild.toml");
    fs::write(
        &wild,
        "[excitation]\nduration = 30.0\n[collection]\nsamples = 40\ndt = 0.01\n\
         [pid]\nkp = 1e9\noutput_limit = 1e12\n[blend]\nc1 = 1.0\nc2 = 1000.0\n",
    )
    .unwrap();
    let out = softblend(dir.path(), &["--config", wild.to_str().unwrap(), "track", "--model", &model, "--out", "w.csv"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("w.csv").exists());
}
