use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjb-planner"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rate_reference_value() {
    let o = run(&["rate", "--n", "2", "--sigma", "1", "--r", "0,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "r,rate\n0.0000000000000000e0,0.0000000000000000e0\n1.0000000000000000e0,2.4249961258080194e-1\n"
    );
}

#[test]
fn rate_over_grid() {
    let o = run(&["rate", "--n", "3", "--r-grid", "0:2:4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 6);
}

#[test]
fn cost_reference_value() {
    let o = run(&["cost", "--n", "2", "--sigma", "1", "--radius", "1", "--r0", "0"]);
    assert!(o.status.success());
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let cost: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
    assert!((cost - 0.123_099_438_370_962_6).abs() < 1e-14);
}

#[test]
fn cost_start_beyond_boundary_fails() {
    let o = run(&["cost", "--radius", "1", "--r0", "1.5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("start beyond stopping boundary"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# rate settings\nn = 2\nsigma = 5\nr = 1\n").unwrap();
    let from_file = run(&["rate", "--config", path(&cfg)]);
    let overridden = run(&["rate", "--config", path(&cfg), "--sigma", "1"]);
    assert!(from_file.status.success() && overridden.status.success());
    assert!(stdout(&overridden).contains("2.4249961258080194e-1"));
    assert_ne!(stdout(&from_file), stdout(&overridden));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = red\n").unwrap();
    let o = run(&["rate", "--config", path(&cfg), "--r", "1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown key"));
}

#[test]
fn verify_default_set_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stdout(&o));
    for f in ["bounds.csv", "equivalence.csv", "picard.csv", "exact4d.csv", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let bounds = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(bounds.starts_with("N,sigma,R,r,bound_name,margin\n"));
    let exact = std::fs::read_to_string(dir.path().join("exact4d.csv")).unwrap();
    assert!(exact.starts_with("sigma,branch,r,u,residual\n"));
}

#[test]
fn verify_injected_fault_fails_naming_bound_violation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--n", "2", "--sigma", "1", "--radius", "1", "--inject-fault", "--out", path(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bound violation"), "{}", stderr(&o));
}

#[test]
fn simulate_truncated_horizon_is_informational() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate", "--paths", "1", "--max-steps", "5", "--seed", "3", "--out", path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("mean,stderr,n_exited,n_paths,dt,seed"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((row[2], row[3], row[5]), ("0", "1", "3"));
}

#[test]
fn simulate_writes_plot_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate", "--n", "2", "--sigma", "5", "--radius", "1", "--paths", "50", "--trace", "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("paths.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 8);
    assert!(svg.contains("stroke-dasharray"));
    let trace = std::fs::read_to_string(dir.path().join("trace_000.csv")).unwrap();
    assert!(trace.starts_with("t,y_1,y_2,cost\n"));
}

#[test]
fn simulate_rejects_start_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--n", "3", "--y0", "0,0", "--out", path(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("y0 has 2 components"));
}

#[test]
fn sweep_zero_column_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--n", "2,10", "--sigma", "1", "--r-grid", "0:1:2", "--out", path(dir.path())]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,sigma,r,rate"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].ends_with(",0.0000000000000000e0"));
    assert!(stdout(&o).contains("0 monotonicity violations"));
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_hjb-planner"))
        .args(["rate", "--r", "1"])
        .env("HJB_PLANNER_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("HJB_PLANNER_THREADS"));
}
