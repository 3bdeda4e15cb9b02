use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qnsolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnsolve")).args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn solve_quad1d_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = qnsolve(&["solve", "--problem", "quad1d", "--method", "nqn-se", "--x0", "2.0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["termination"], "RootFound");
    assert_eq!(s["seed"], 0);
    let x = s["final_x"][0].as_f64().unwrap();
    assert!((x - 1.41421356).abs() < 1e-8);

    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,x0,f,grad_half_norm,delta_index,branch,minsp_A,gamma,step_norm");
    assert_eq!(lines.count() as u64, s["iterations"].as_u64().unwrap());
}

#[test]
fn identical_arguments_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = qnsolve(&[
            "solve", "--problem", "cubic2d", "--x0", "-1.1,0.7", "--line-search", "beta-grid", "--seed", "42",
            "--out", dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["trace.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let s = summary(a.path());
    assert_eq!(s["seed"], 42);
    let csv = fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count() as u64 - 1, s["iterations"].as_u64().unwrap());
    assert!(csv.lines().next().unwrap().starts_with("k,x0,x1,f,"));
}

#[test]
fn config_errors_exit_with_one() {
    let out = qnsolve(&["solve", "--problem", "quad1d", "--method", "lm-m", "--tau", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));

    let out = qnsolve(&["solve", "--problem", "overdet", "--det-eps", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("det_guard"));

    let out = qnsolve(&["solve", "--problem", "quad1d", "--method", "lm-m", "--deltas", "1,2,3"]);
    assert_eq!(out.status.code(), Some(1));

    let out = qnsolve(&["solve", "--problem", "quad1d", "--tau", "1.5", "--allow-large-tau"]);
    assert_eq!(out.status.code(), Some(0));

    let out = qnsolve(&["solve", "--method", "warp"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    // the Jacobian's second column vanishes on y = 0 while HᵀF does not
    let out = qnsolve(&["solve", "--problem", "circles2d", "--method", "newton", "--x0", "2,0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"problem": "circles2d", "method": "lm-m", "x0": [2.0, 2.0], "tau": 0.9, "seed": 5}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = qnsolve(&["solve", "--config", cfg.to_str().unwrap(), "--tau", "0.3", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out_dir);
    assert_eq!(s["problem"], "circles2d");
    assert_eq!(s["method"], "lm-m");
    assert_eq!(s["tau"], 0.3);
    assert_eq!(s["seed"], 5);

    fs::write(&cfg, r#"{"problem": "circles2d", "tua": 0.5}"#).unwrap();
    assert_eq!(qnsolve(&["solve", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn mc_saddle_escapes() {
    let out = qnsolve(&["mc-saddle", "--problem", "saddle1d", "--center", "0", "--radius", "0.05", "--trials", "100", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["summary"]["escapes"].as_u64().unwrap() >= 95);
    assert_eq!(v["summary"]["seed"], 7);
}

#[test]
fn basin_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = qnsolve(&["basin", "--problem", "cubic2d", "--rect", "-2,2,-2,2", "--res", "21,11", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let pgm = fs::read_to_string(dir.path().join("basin.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n21 11\n255\n"));
    assert_eq!(pgm.lines().count(), 3 + 11);
    let csv = fs::read_to_string(dir.path().join("basin.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 21 * 11);
    assert_eq!(csv.lines().next().unwrap(), "ix,iy,root_index,iters");

    assert_eq!(qnsolve(&["basin", "--problem", "quad1d", "--out", dir.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn suite_rate_and_check_run() {
    let out = qnsolve(&["suite", "--methods", "nqn-se,newton"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("overdet") && l.contains("skipped")));

    let out = qnsolve(&["rate"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1 + 3 * 2);

    let out = qnsolve(&["check", "--starts", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));
}
