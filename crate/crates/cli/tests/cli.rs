use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn imreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imreg")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn tuned_run_writes_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = imreg(&["run", "-s", &scenario("tuned.cfg"), "--tend", "20", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files(dir.path()), ["estimation_error.svg", "log.csv", "metrics.json", "tracking_error.svg", "trajectory.svg"]);

    let csv = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,e,zeta,u,a11,a21,a23,detT1,detT2,khat\n"));
    assert_eq!(csv.lines().count(), 2002);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    assert!(report["metrics"]["trailing_sup_abs_e"].as_f64().unwrap() < 1e-2);
}

#[test]
fn adaptive_mode_adds_gain_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = imreg(&[
        "run",
        "-s",
        &scenario("tuned.cfg"),
        "--mode",
        "adaptive",
        "--tend",
        "10",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(files(dir.path()).contains(&"khat.svg".to_string()));
    let csv = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    assert!(last.rsplit(',').next().unwrap().parse::<f64>().unwrap() >= 150.0);
}

#[test]
fn default_run_diverges_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = imreg(&["run", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged at t ="));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert!(report["status"]["diverged_at"].as_f64().is_some());
    assert!(dir.path().join("log.csv").exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = imreg(&["run", "--tend", "0.01", "-o", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: cannot create"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "model.m1 = -1, 0, 0, 0\n").unwrap();
    let out = imreg(&["run", "-s", bad.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Hurwitz"));

    let out = imreg(&["run", "--step", "0", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = imreg(&["run", "-s", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = imreg(&[
        "sweep",
        "-s",
        &scenario("tuned.cfg"),
        "--tend",
        "5",
        "--grid",
        "c2=-2,0,2",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("c2,status,sup_e"));
    let failed = lines[1..].iter().any(|l| !l.contains(",ok,"));
    assert_eq!(out.status.code(), Some(if failed { 3 } else { 0 }));
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = imreg(&["sweep", "--grid", "sigma=", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no grid points"));
}

#[test]
fn check_passes() {
    let out = imreg(&["check", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}
