use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fejerlab"));
    cmd.env_remove("FEJERLAB_OUT");
    cmd
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn empty_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    fs::write(&cfg, "").unwrap();
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config error"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = bin().arg("run").arg("/nonexistent/cfg.json").output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn rotation_run_reports_five_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(config("rotation_1_5.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["clusters"], 5);
    assert_eq!(summary["pass"], true);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("n,x_0,x_1,norm,step_norm\n"));
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("FEJERLAB_OUT", dir.path())
        .arg("run")
        .arg(config("skew_2x2.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("skew_2x2").join("summary.json").exists());
}

#[test]
fn report_lists_failing_identity() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = dir.path().join(name);
        let out = bin()
            .arg("run")
            .arg(config(&format!("{name}.json")))
            .arg("--out")
            .arg(&d)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        d.join("summary.json")
    };
    let rotation = run("rotation_1_5");
    let shift = run("shift_exact");

    let out = bin().arg("report").arg(&rotation).arg(&shift).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let table = stdout(&out);
    assert!(table.contains("rotation_cluster_count") && table.contains("exact:orthogonality"));
    assert!(table.contains("overall: PASS"));

    // tamper with one identity
    let mut summary: serde_json::Value = serde_json::from_slice(&fs::read(&shift).unwrap()).unwrap();
    for c in summary["contracts"].as_array_mut().unwrap() {
        if c["name"] == "exact:inner" {
            c["pass"] = false.into();
        }
    }
    summary["pass"] = false.into();
    fs::write(&shift, serde_json::to_string_pretty(&summary).unwrap()).unwrap();
    let json = dir.path().join("report.json");
    let out = bin()
        .arg("report")
        .arg(&rotation)
        .arg(&shift)
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("failed: shift_exact: exact:inner"));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn report_rejects_corrupt_summary() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("summary.json");
    fs::write(&bad, "[1, 2").unwrap();
    let out = bin().arg("report").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn oracle_command_passes() {
    let out = bin().args(["oracle", "--max-n", "40"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("vandermonde"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = bin()
            .arg("run")
            .arg(config("box_face.json"))
            .arg("--out")
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["trace.csv", "directions.csv", "summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
}
