//! End-to-end runs of the `pipewave` binary.

use std::path::Path;
use std::process::Command;

fn pipewave(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pipewave")).args(args).current_dir(dir).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const PIPE: &str = r#"{"vertices": [{"id": "a", "boundary": {"base": 2.0}}, {"id": "b", "boundary": {"base": 1.0}}],
 "edges": [{"id": "e1", "from": "a", "to": "b", "length": 1.0}]}"#;

#[test]
fn check_default_network_passes_with_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = pipewave(dir.path(), &["check"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("PASS  compatibility"));
    assert!(out.contains("(2 warnings)"));
}

#[test]
fn check_equal_order_pair_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = pipewave(dir.path(), &["check", "--set", r#"discretization={"method":"fem_p1p1","h":0.2}"#]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL  compatibility"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pipewave(dir.path(), &["run", "--set", "time.dt=0"]).0, 2);
    assert_eq!(pipewave(dir.path(), &["run", "--set", "bogus=1"]).0, 2);
    let (code, _, err) = pipewave(dir.path(), &["steady", "--config", "missing.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.json"));
    assert_eq!(pipewave(dir.path(), &["reduce"]).0, 2);
    assert_eq!(pipewave(dir.path(), &["frobnicate"]).0, 2);
}

#[test]
fn steady_linear_pipe_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pipe.json"), PIPE).unwrap();
    let args = [
        "steady",
        "--set",
        "network_file=pipe.json",
        "--set",
        r#"damping={"family":"linear","beta":1.0}"#,
        "--set",
        r#"discretization={"method":"fem","h":0.25}"#,
        "-o",
        "s.csv",
    ];
    let (code, _, err) = pipewave(dir.path(), &args);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("edge,x,p,m"));
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (x, p, m): (f64, f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!((p - (2.0 - x)).abs() < 1e-8 && (m - 1.0).abs() < 1e-8, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn run_writes_energy_samples() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"time": {"dt": 0.01, "t_end": 20.0, "sample_times": [0.0, 10.0, 20.0]},
                     "table1": {"fit_window": [10.0, 20.0]}, "output": "energy.csv"}"#;
    std::fs::write(dir.path().join("run.json"), config).unwrap();
    let (code, out, err) = pipewave(dir.path(), &["run", "--config", "run.json"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("gamma = 0.117"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("t,E_state,E_deriv\n0,99.04"));
}

#[test]
fn table1_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["table1", "--set", r#"table1.methods=[{"method":"spectral","order":2},{"method":"fem","h":0.5}]"#, "-o", "t.csv"];
    let (code, _, err) = pipewave(dir.path(), &args);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,param,E0,E10,E20,E30,E40,E50,gamma");
    assert!(lines[1].starts_with("spectral,2,") && lines[2].starts_with("fem,0.5,"));
}

#[test]
fn reduce_saves_a_basis_and_reports_rank_limits() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--set", "mor.training_h=0.1", "--set", "mor.training_samples=51", "--set", r#"time={"dt":0.01,"t_end":5.0,"sample_times":[0.0,5.0]}"#];
    let mut args = vec!["reduce"];
    args.extend(base);
    args.extend(["--set", "mor.n_sv=2", "-o", "basis.txt"]);
    let (code, out, err) = pipewave(dir.path(), &args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("compatible: true"));
    assert!(std::fs::read_to_string(dir.path().join("basis.txt")).unwrap().starts_with("# pipewave reduced basis"));

    let mut args = vec!["reduce"];
    args.extend(base);
    args.extend(["--set", "mor.n_sv=1000"]);
    let (code, _, err) = pipewave(dir.path(), &args);
    assert_eq!(code, 1);
    assert!(err.contains("snapshot rank"), "{err}");
}
