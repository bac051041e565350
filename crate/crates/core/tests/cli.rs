//! End-to-end runs of the `isodelay` binary.

use std::path::Path;
use std::process::{Command, Output};

use isodelay::model::{read_trajectory_csv, write_trajectory_csv, Trajectory};

fn isodelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isodelay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_trajectory_reports_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = isodelay(&["solve", "--builtin", "parabola", "--n", "200", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["trajectory.csv", "result.json", "reports.json", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let result: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("result.json")).unwrap()).unwrap();
    assert!((result["lambda"][0].as_f64().unwrap() - 24.0).abs() < 1e-2);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(!csv.contains('\r'));
    assert!(csv.lines().next().unwrap().starts_with('t'));
}

#[test]
fn manifest_hashes_match_the_files() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let out = isodelay(&["solve", "--builtin", "parabola", "--n", "40", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 3);
    for entry in outputs {
        let bytes = std::fs::read(dir.path().join(entry["path"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = isodelay(&["solve", "--builtin", "delayed", "--out", path(dir.path())]);
        assert_eq!(code(&out), 0);
    }
    for name in ["trajectory.csv", "result.json", "reports.json", "manifest.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn verify_reference_passes_for_several_multipliers() {
    for lambda in ["-1", "0", "2"] {
        let out = isodelay(&["verify", "--builtin", "example33", "--lambda", lambda]);
        assert_eq!(code(&out), 0, "lambda {lambda}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn verify_rejects_a_perturbed_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = isodelay(&["solve", "--builtin", "parabola", "--n", "80", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let csv = dir.path().join("trajectory.csv");
    let lambda = {
        let result: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("result.json")).unwrap()).unwrap();
        result["lambda"][0].as_f64().unwrap().to_string()
    };
    let verify = |file: &Path| {
        code(&isodelay(&[
            "verify", "--builtin", "parabola", "--traj", path(file), "--lambda", &lambda,
        ]))
    };
    assert_eq!(verify(&csv), 0);

    let traj = read_trajectory_csv(&csv).unwrap();
    let mut values = traj.values().to_vec();
    values[50] += 0.05;
    let bent = Trajectory::new(traj.t_start(), traj.step(), 1, values).unwrap();
    let bad = dir.path().join("bent.csv");
    write_trajectory_csv(&bent, &bad).unwrap();
    assert_eq!(verify(&bad), 1);
}

#[test]
fn control_form_verification_of_the_solver_output() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&isodelay(&["solve", "--builtin", "parabola", "--n", "80", "--out", path(dir.path())])), 0);
    let out = isodelay(&[
        "verify",
        "--builtin",
        "parabola",
        "--traj",
        path(&dir.path().join("trajectory.csv")),
        "--lambda",
        "24",
        "--control-form",
        "--format",
        "json",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("stationarity"), "{stdout}");
}

#[test]
fn noncommensurate_grid_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    // parabola has τ = 0.25; a step of 0.1 does not divide it
    let traj = Trajectory::from_fn(-0.3, 0.1, 14, 1, |t| vec![t.max(0.0) * (1.0 - t)]).unwrap();
    let file = dir.path().join("odd.csv");
    write_trajectory_csv(&traj, &file).unwrap();
    let out = isodelay(&["verify", "--builtin", "parabola", "--traj", path(&file), "--lambda", "24"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn input_errors_exit_with_two() {
    assert_eq!(code(&isodelay(&["solve", "--builtin", "nope"])), 2);
    assert_eq!(code(&isodelay(&["solve"])), 2);
    assert_eq!(code(&isodelay(&["solve", "--builtin", "parabola", "--n", "30"])), 2);
    assert_eq!(code(&isodelay(&["verify", "--builtin", "delayed"])), 2);
    assert_eq!(code(&isodelay(&["frobnicate"])), 2);
}

#[test]
fn solve_that_runs_out_of_iterations_exits_with_three() {
    let out = isodelay(&["solve", "--builtin", "parabola", "--max-outer", "1", "--max-inner", "2"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn noether_verdicts() {
    assert_eq!(code(&isodelay(&["noether", "--builtin", "example33"])), 0);
    assert_eq!(code(&isodelay(&["noether", "--builtin", "parabola"])), 0);
    assert_eq!(code(&isodelay(&["noether", "--builtin", "nonautonomous", "--lambda", "24"])), 1);
}

#[test]
fn noether_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = isodelay(&["noether", "--builtin", "example33", "--format", "json", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("noether.json")).unwrap()).unwrap();
    assert!(report.is_object());
    assert!(dir.path().join("manifest.json").exists());
}
