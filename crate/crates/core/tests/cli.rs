use std::fs;
use std::path::Path;

use sl_solv::cli::{run, EXIT_INPUT};

fn problem(dir: &Path, name: &str, alpha: f64, beta: f64) -> String {
    let path = dir.join(name);
    fs::write(&path, format!(r#"{{"family":"power_law","alpha":{alpha},"beta":{beta}}}"#)).unwrap();
    path.to_string_lossy().into_owned()
}

fn sl(args: &[&str]) -> i32 {
    run(std::iter::once("sl-solv").chain(args.iter().copied()))
}

#[test]
fn analyze_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let good = problem(dir.path(), "good.json", 1.5, 1.0);
    let bad = problem(dir.path(), "bad.json", 0.75, 1.0);
    assert_eq!(sl(&["analyze", "--problem", &good, "--out", &out]), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "CorrectlySolvable");
    for key in ["D", "sigma1", "sigma5", "B", "hartman_wintner", "evidence"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(sl(&["analyze", "--problem", &bad, "--out", &out]), 1);
}

#[test]
fn input_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json").to_string_lossy().into_owned();
    assert_eq!(sl(&["analyze", "--problem", &missing]), EXIT_INPUT);
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"family\":\"power_law\"").unwrap();
    assert_eq!(sl(&["analyze", "--problem", broken.to_str().unwrap()]), EXIT_INPUT);
    assert_eq!(sl(&["no-such-command"]), EXIT_INPUT);
}

#[test]
fn sweep_is_deterministic_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |sub: &str| {
        let out = dir.path().join(sub);
        let out = out.to_string_lossy().into_owned();
        assert_eq!(sl(&["sweep", "--alpha-list", "2,0.6,1", "--beta-list", "1,0.75", "--out", &out]), 0);
        fs::read_to_string(Path::new(&out).join("sweep.csv")).unwrap()
    };
    let first = run_once("a");
    assert_eq!(first, run_once("b"));
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "alpha,beta,verdict,D_or_exponent");
    assert_eq!(lines.len(), 7);
    let verdicts: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(verdicts, ["solvable", "solvable", "not", "not", "solvable", "solvable"]);
    assert!(lines[1].starts_with("2.0000000000000000e0,1.0000000000000000e0,"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    assert_eq!(sl(&["sweep", "--out", &out]), 0);
    assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), "alpha,beta,verdict,D_or_exponent\n");
}

#[test]
fn solve_refuses_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let bad = problem(dir.path(), "bad.json", 0.75, 1.0);
    assert_eq!(sl(&["solve", "--problem", &bad, "--out", &out]), 1);
    assert!(!dir.path().join("solution.csv").exists());
}

#[test]
fn solve_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let good = problem(dir.path(), "good.json", 1.5, 1.0);
    assert_eq!(sl(&["solve", "--problem", &good, "--out", &out, "--n", "41"]), 0);
    let solution = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(solution.starts_with("x,y\n"));
    assert_eq!(solution.lines().count(), 42);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["max_residual"].as_f64().unwrap() < 1e-4);
    for f in ["residual.csv", "green_slice.csv", "norms.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn verify_detects_a_corrupted_system() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let good = problem(dir.path(), "good.json", 1.0, 1.0);
    assert_eq!(sl(&["verify", "--problem", &good, "--out", &out]), 0);
    assert_eq!(sl(&["verify", "--problem", &good, "--out", &out, "--corrupt-u", "1.5"]), 1);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], false);
}

#[test]
fn pfss_dump_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let good = problem(dir.path(), "good.json", 1.0, 1.0);
    assert_eq!(sl(&["pfss-dump", "--problem", &good, "--out", &out, "--n", "11"]), 0);
    let pfss = fs::read_to_string(dir.path().join("pfss.csv")).unwrap();
    assert!(pfss.starts_with("x,u,v,rho\n"));
    assert_eq!(pfss.lines().count(), 12);
    assert!(fs::read_to_string(dir.path().join("width.csv")).unwrap().starts_with("x,s\n"));
}
