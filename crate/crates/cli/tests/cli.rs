use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqd-scatter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn bound_states_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bound-states", "--grid", "21", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("two-particle.csv")).unwrap();
    assert!(csv.lines().count() > 4);
    assert!(dir.path().join("orbitals.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("E0L"));
}

#[test]
fn sweep_and_trace_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["sweep", "--grid", "21", "--energies", "4,8", "--format", "json", "--out", d, "--jobs", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8_lossy(&out.stdout).trim().to_string();
    assert!(listed.ends_with(".json"));
    assert!(std::path::Path::new(&listed).exists());

    let out = run(&["trace", "--stay", "0.5", "--injections", "3", "--out", d]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("trace-entangle.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let c: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((c - 0.875).abs() < 1e-12);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["sweep", "--grid", "3", "--out", d])), 1);
    assert_eq!(code(&run(&["sweep", "--grid", "21", "--step", "0", "--out", d])), 1);
    assert_eq!(code(&run(&["trace", "--stay", "1.5", "--out", d])), 1);
    assert_eq!(code(&run(&["reproduce-figure", "7"])), 1);
    assert_eq!(code(&run(&["no-such-verb"])), 1);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[device]\nwell_depth = 1.0\n").unwrap();
    assert_eq!(code(&run(&["bound-states", "--config", cfg.to_str().unwrap(), "--out", d])), 1);
}

#[test]
fn solver_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--grid", "21", "--energies", "150,160", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn io_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&run(&["bound-states", "--config", missing.to_str().unwrap()])), 3);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(&["trace", "--stay", "0.5", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(code(&run(&["--help"])), 0);
}
