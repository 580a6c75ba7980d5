use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, args: &[&str], config: Option<&Value>) -> (Output, PathBuf) {
    let out = dir.join("out");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_liouville"));
    cmd.args(args).arg("--output").arg(&out);
    if let Some(c) = config {
        let path = dir.join("config.json");
        std::fs::write(&path, c.to_string()).unwrap();
        cmd.arg("--config").arg(path);
    }
    (cmd.output().unwrap(), out)
}

fn read(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn error_body(output: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&output.stderr).trim()).unwrap()
}

fn showcase() -> Value {
    json!({
        "mesh": { "generate": { "shape": "cylinder", "refinement": 2 } },
        "cones": [ { "position": [-1.0, 0.0, 0.5], "alpha": 1.2 } ],
        "lambda": 4.8 * PI,
    })
}

#[test]
fn classify_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = run(dir.path(), &["classify"], Some(&showcase()));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let c = read(out.join("classify.json"));
    assert!(c.to_string().contains("supercritical"));
    let m = read(out.join("manifest.json"));
    assert_eq!(m["command"], "classify");
    assert!(m["wall_time"].as_f64().unwrap() >= 0.0);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f == "classify.json"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = run(dir.path(), &["spectrum", "--lambda", "3.0"], Some(&showcase()));
    assert!(output.status.success());
    let m = read(out.join("manifest.json"));
    assert_eq!(m["config"]["lambda"].as_f64(), Some(3.0));
}

#[test]
fn green_writes_field_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "mesh": { "generate": { "shape": "disk", "refinement": 3 } },
        "pole": [0.0, 0.0, 0.0],
    });
    let (output, out) = run(dir.path(), &["green"], Some(&config));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.starts_with("green_") && n.ends_with(".field")), "{names:?}");
    assert!(names.iter().any(|n| n.starts_with("green_") && n.ends_with(".json")), "{names:?}");
}

#[test]
fn minimize_then_check_stored_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({ "mesh": { "generate": { "shape": "cylinder", "refinement": 2 } }, "lambda": 2.0 * PI });
    let (output, out) = run(dir.path(), &["solve"], Some(&config));
    assert!(output.status.success());
    let r = read(out.join("report.json"));
    assert_eq!(r["status"], "converged");
    assert!(r["residual"].as_f64().unwrap() <= 1e-8);

    let mut check = config.clone();
    check["field"] = json!(out.join("solution.field"));
    let sub = dir.path().join("check");
    std::fs::create_dir_all(&sub).unwrap();
    let (output, out) = run(&sub, &["check"], Some(&check));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let f = read(out.join("field_check.json"));
    assert!(f["gauss_bonnet_relative_error"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn guard_band_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let lambda = (4.0 * PI + 1e-9).to_string();
    let (output, _) = run(dir.path(), &["solve", "--strategy", "minmax", "--k", "1", "--lambda", &lambda], Some(&showcase()));
    assert_eq!(output.status.code(), Some(1));
    let e = error_body(&output);
    assert_eq!(e["exit_code"], 1);
    assert!(e["message"].as_str().unwrap().contains("4π"), "{e}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (output, _) = run(dir.path(), &["classify"], Some(&json!({ "lamda": 3.0 })));
    assert_eq!(output.status.code(), Some(1));
    assert!(error_body(&output)["message"].as_str().unwrap().contains("lamda"));
}

#[test]
fn invalid_cone_order_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({ "cones": [ { "position": [-1.0, 0.0, 0.5], "alpha": -1.5 } ] });
    let (output, _) = run(dir.path(), &["classify"], Some(&config));
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(error_body(&output)["error"], "input");
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (output, _) = run(dir.path(), &["solve", "--strategy", "sideways"], None);
    assert_eq!(output.status.code(), Some(1));
    assert_eq!(error_body(&output)["error"], "usage");
    let (output, _) = run(dir.path(), &["continue", "--lambda-path", "1"], None);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn thread_count_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_liouville"))
        .arg("classify")
        .arg("--output")
        .arg(dir.path())
        .env("LIOUVILLE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn bubble_reports_three_fits() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "mesh": { "generate": { "shape": "cylinder", "refinement": 2 } },
        "lambda": 6.0 * PI,
    });
    let (output, out) = run(dir.path(), &["bubble"], Some(&config));
    assert!(output.status.success());
    let b = read(out.join("bubble.json"));
    for key in ["dirichlet", "log_mass", "functional"] {
        assert!(b[key]["slope"].is_number(), "{key}");
    }
    assert_eq!(b["samples"].as_array().unwrap().len(), 3);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for i in 0..2 {
        let sub = dir.path().join(i.to_string());
        std::fs::create_dir_all(&sub).unwrap();
        let (output, out) = run(&sub, &["solve", "--strategy", "minmax"], Some(&showcase()));
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
