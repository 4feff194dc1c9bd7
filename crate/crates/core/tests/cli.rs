use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agrlab::data::load_dataset;
use agrlab::prob::{mutual_information, JointDistribution};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agrlab"))
}

fn joint_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/bsc_joint.json")
}

fn agrlab(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("elapsed_seconds");
    v
}

#[test]
fn ib_curve_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let joint = joint_path();
    let joint = joint.to_str().unwrap();
    let mut reports = Vec::new();
    let mut curves = Vec::new();
    let out = dir.path().join("run");
    for _ in 0..2 {
        let o = agrlab(&["ib-curve", "--joint", joint, "--beta-grid", "0:20:0.5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(report(&out.join("report.json")));
        curves.push(std::fs::read_to_string(out.join("curve.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(curves[0], curves[1]);
    let r = &reports[0];
    assert_eq!(r["command"], "ib-curve");
    assert_eq!(r["seed"], 7);
    assert_eq!(r["config"]["beta_grid"], "0:20:0.5");
    assert_eq!(curves[0].lines().count(), 42);
}

#[test]
fn brute_code_with_one_codeword_costs_the_full_information() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.json");
    let joint = joint_path();
    let o = agrlab(&["quantize", "--joint", joint.to_str().unwrap(), "--n", "1", "--M", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let mi = mutual_information(&JointDistribution::load(&joint).unwrap());
    let d = r["results"]["distortion_nats"].as_f64().unwrap();
    assert!((d - mi).abs() < 1e-12, "{d} vs {mi}");
}

#[test]
fn synthesized_blobs_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("blobs.csv");
    let o = agrlab(&["synth-blobs", "--per-class", "20", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ds = load_dataset(&out).unwrap();
    assert_eq!(ds.len(), 40);
    let again = dir.path().join("again.csv");
    agrlab::data::save_dataset(&ds, &again).unwrap();
    assert_eq!(load_dataset(&again).unwrap(), ds);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("mine.json");
    std::fs::write(&config, r#"{"dist": "identity", "steps": 50, "batch": 32}"#).unwrap();
    let out = dir.path().join("m.json");
    let o = agrlab(&["mine-est", "--config", config.to_str().unwrap(), "--steps", "20", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["config"]["dist"], "identity");
    assert_eq!(r["config"]["steps"], 20);
    assert_eq!(r["config"]["batch"], 32);
}

#[test]
fn exit_codes_separate_usage_from_runtime_failures() {
    assert_eq!(agrlab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(agrlab(&["ib-curve", "--joint", "/nonexistent/joint.json"]).status.code(), Some(2));
    assert_eq!(agrlab(&["mine-est", "--dist", "gaussian"]).status.code(), Some(2));
    assert_eq!(agrlab(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub/q.json");
    let joint = joint_path();
    let o = agrlab(&["quantize", "--joint", joint.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
