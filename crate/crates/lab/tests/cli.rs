use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn lab(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_temple-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr))
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(configs().join(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    path
}

#[test]
fn pass_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "chart_dump_minkowski.json", |v| v["resolution"]["samples"] = 20.into());
    let out = dir.path().join("out");
    let (code, text) = lab(&["chart-dump", "--config", config.to_str().unwrap(), "--seed", "7"], &out);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("verdict: pass"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["experiment"], "chart-dump");
    assert_eq!(report["config_echo"]["seed"], 7);
    assert_eq!(report["config_echo"]["output_dir"], out.to_str().unwrap());
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn failing_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "isometry_stretch.json", |v| {
        v["resolution"]["samples"] = 8.into();
        v["isometry"]["pairs"] = 2.into();
    });
    let (code, text) = lab(&["isometry", "--config", config.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code, 1, "{text}");
}

#[test]
fn rejected_and_broken_inputs_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let rescaled = configs().join("isometry_rescaled.json");
    let (code, text) = lab(&["isometry", "--config", rescaled.to_str().unwrap()], &out);
    assert_eq!(code, 3);
    assert!(text.contains("not unit-gradient"), "{text}");
    assert!(!out.join("report.json").exists());

    let missing = dir.path().join("missing.json");
    assert_eq!(lab(&["gradient", "--config", missing.to_str().unwrap()], &out).0, 3);

    let far = write_config(dir.path(), "chart_dump_minkowski.json", |v| v["chart"]["q"] = serde_json::json!([5, 0, 0, 0]));
    assert_eq!(lab(&["chart-dump", "--config", far.to_str().unwrap()], &out).0, 3);
}
