use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lti(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lti"))
        .args(args)
        .env_remove("LTI_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lti(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Fast settings on the two-channel synthetic dataset.
fn quick(out: &Path) -> Vec<String> {
    ["--dataset", "synthetic2", "--epochs", "3", "--hidden", "6", "--out", out.to_str().unwrap()]
        .map(String::from)
        .to_vec()
}

fn run(cmd: &str, base: &[String], extra: &[&str]) -> String {
    let mut args = vec![cmd];
    args.extend(base.iter().map(String::as_str));
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn missing_input_names_path_with_data_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = lti(&["decompose", "--dataset", "csv", "--data", missing.to_str().unwrap(), "--train-len", "10", "--val-len", "5", "--test-len", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn unavailable_public_dataset_names_directory() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("calit2-here");
    let out = lti(&["decompose", "--dataset", "calit2", "--data", data.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("calit2-here"));
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let base = quick(dir.path());
    let mut args = vec!["train"];
    args.extend(base.iter().map(String::as_str));
    args.extend(["--time-steps", "0"]);
    assert_eq!(lti(&args).status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "horizon = 5\nno-such-key = 1\n").unwrap();
    let out = lti(&["decompose", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let base = quick(dir.path());
    let stdout = run("decompose", &base, &[]);
    assert!(stdout.contains("2 channels x (24 + 7) entries"));
    let first = std::fs::read(dir.path().join("profile.json")).unwrap();
    run("decompose", &base, &[]);
    assert_eq!(first, std::fs::read(dir.path().join("profile.json")).unwrap());
}

#[test]
fn staged_pipeline_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let base = quick(out);
    run("decompose", &base, &[]);

    // Ablation: both arms land in one metrics file.
    run("train", &base, &[]);
    run("train", &base, &["--seasonal", "off"]);
    let metrics = json(&out.join("metrics.json"));
    for arm in ["seasonal", "plain"] {
        assert!(metrics[arm]["test_mse"].as_f64().unwrap() > 0.0, "{arm}");
        assert!(metrics[arm]["epochs"].as_u64().unwrap() <= 3);
        assert!(metrics[arm]["wall_seconds"].as_f64().is_some());
    }
    assert!(metrics["improvement"].as_f64().is_some());
    let model = json(&out.join("model.json"));
    assert_eq!(model["topology"]["output_width"], 10);

    // k is linear in c on the first sweep.
    run("calibrate", &base, &["--c", "1.0", "--max-iterations", "1"]);
    let one = json(&out.join("params.json"));
    run("calibrate", &base, &["--c", "2.0", "--max-iterations", "1"]);
    let two = json(&out.join("params.json"));
    let (k1, k2) = (one["k"].as_f64().unwrap(), two["k"].as_f64().unwrap());
    assert!((k2 - 2.0 * k1).abs() <= 1e-9 * k2);
    assert_eq!(one["x0"], two["x0"]);

    run("calibrate", &base, &[]);
    let params = json(&out.join("params.json"));
    for key in ["k", "x0", "c", "calibrated_on", "iterations"] {
        assert!(!params[key].is_null(), "{key}");
    }
    assert!(json(&out.join("calibration.json"))["trace"].as_array().unwrap().len() >= 1);

    // Test split of 500 frames scored after L = 5 warm-up frames.
    let stdout = run("detect", &base, &["--diagnostics", "--threshold", "0.9"]);
    assert!(stdout.contains("frames with score >= 0.9"));
    let scores = std::fs::read_to_string(out.join("scores.csv")).unwrap();
    let rows: Vec<&str> = scores.lines().collect();
    assert_eq!(rows[0], "timestamp,lti,as,flags");
    assert_eq!(rows.len() - 1, 495);
    let diag = std::fs::read_to_string(out.join("diagnostics.jsonl")).unwrap();
    assert_eq!(diag.lines().count(), 495);
    let line: Value = serde_json::from_str(diag.lines().next().unwrap()).unwrap();
    assert_eq!(line["wlsdist"].as_array().unwrap().len(), 5);

    run("detect", &base, &[]);
    assert_eq!(scores, std::fs::read_to_string(out.join("scores.csv")).unwrap());

    let stdout = run("evaluate", &base, &["--bench"]);
    assert!(stdout.starts_with("auc "));
    let roc = std::fs::read_to_string(out.join("roc.csv")).unwrap();
    assert!(roc.starts_with("fpr,tpr\n"));
    assert!(roc.lines().last().unwrap().starts_with("# auc="));
    let bench = json(&out.join("bench.json"));
    assert!(bench[0]["mean_ms"].as_f64().unwrap() > 0.0);

    // Labels that do not cover the scored frames.
    let labels = out.join("short-labels.csv");
    std::fs::write(&labels, "timestamp,label\n1999-01-01T00:00:00,0\n").unwrap();
    let mut args = vec!["evaluate"];
    args.extend(base.iter().map(String::as_str));
    args.extend(["--label-file", labels.to_str().unwrap()]);
    assert_eq!(lti(&args).status.code(), Some(3));
}

#[test]
fn generated_csv_runs_as_a_csv_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["generate", "--dataset", "synthetic5", "--out", out.to_str().unwrap()]);
    let series = out.join("series.csv");
    let labels = out.join("labels.csv");
    let header = std::fs::read_to_string(&series).unwrap();
    assert_eq!(header.lines().count(), 2401);
    let run_out = out.join("run");
    let stdout = ok(&[
        "repro",
        "csv",
        "--data",
        series.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--train-len",
        "1600",
        "--val-len",
        "300",
        "--test-len",
        "500",
        "--epochs",
        "3",
        "--hidden",
        "6",
        "--out",
        run_out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("auc "));
}

#[test]
fn committed_configs_match_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in lti_cli::PRESETS {
        let file = dir.join(format!("{name}.toml"));
        let resolved = lti_cli::PipelineConfig::resolve(Some(&file), &Default::default()).unwrap();
        assert_eq!(resolved, lti_cli::PipelineConfig::preset(name).unwrap(), "{name}");
    }
}
