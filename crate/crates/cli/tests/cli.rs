//! End-to-end runs of the `fsp` binary on small grids.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fsp_cli::commands::strip_wall_clock;

const SMALL: &str = "s = 0.75\nt = 0.8\nq = 2.5\na = 0.05\nmu = 30\nlambda = 1\nn = 24\nL = 16\n";

fn fsp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fsp"));
    cmd.args(args).env_remove("FSP_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn data_rows(summary: &str) -> Vec<&str> {
    summary.lines().skip(1).filter(|l| !l.is_empty()).collect()
}

#[test]
fn solve_writes_artifacts_with_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join("out");
    let o = fsp(&["solve", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["params.txt", "summary.csv", "trace.csv", "u.bin"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let iters: Vec<usize> = trace.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(iters.len() > 1);
    assert!(iters.windows(2).all(|w| w[1] > w[0]));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout), summary);
    assert_eq!(data_rows(&summary).len(), 1);
}

#[test]
fn identical_runs_and_params_echo_reproduce_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let run = |name: &str, cfg: &str| {
        let out = dir.path().join(name);
        let o = fsp(&["solve", cfg, "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(out.join("summary.csv")).unwrap()
    };
    let a = run("a", &cfg);
    let b = run("b", &cfg);
    assert_eq!(strip_wall_clock(&a), strip_wall_clock(&b));
    // params.txt lists every effective value and is itself a valid config.
    let echo = dir.path().join("a/params.txt");
    let c = run("c", echo.to_str().unwrap());
    assert_eq!(strip_wall_clock(&a), strip_wall_clock(&c));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.cfg", &format!("{SMALL}sweep_mu = 1, 10, 100\n"));
    let out = dir.path().join("out");
    let o = fsp(&["sweep", &cfg, "--out", out.to_str().unwrap()], &[("FSP_THREADS", "2")]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows = data_rows(&summary);
    assert_eq!(rows.len(), 3);
    for (row, mu) in rows.iter().zip(["1.0", "10.0", "100.0"]) {
        assert_eq!(row.split(',').nth(5), Some(mu));
    }
    for i in 0..3 {
        assert!(out.join(format!("run-{i:03}/params.txt")).exists());
    }
}

#[test]
fn regime_reports_and_keeps_its_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join("out");
    let o = fsp(&["regime", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("regime=L2-subcritical"));
    assert!(text.contains("applicable=subcritical-multiplicity"));
    assert_eq!(fs::read_to_string(out.join("regime.txt")).unwrap(), text);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        ("weak.cfg", "s = 0.5\nt = 0.8\nq = 3\na = 1\nmu = 1\nlambda = 1\n", "2s+2t"),
        ("unknown.cfg", "s = 0.8\nt = 0.8\nq = 4\na = 1\nmu = 1\nlambda = 1\nbogus = 3\n", "bogus"),
        ("missing.cfg", "s = 0.8\nt = 0.8\nq = 4\na = 1\nmu = 1\n", "lambda"),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(dir.path(), name, text);
        let o = fsp(&["regime", &cfg, "--out", out], &[]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(needle), "{name}");
    }
    let o = fsp(&["regime", dir.path().join("absent.cfg").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let o = fsp(&["sweep", &cfg, "--out", out], &[("FSP_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}
