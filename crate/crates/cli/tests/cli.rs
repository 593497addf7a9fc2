use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bearing_pose::sim::{ScenarioDoc, PAPER_SEC5};
use serde_json::Value;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bearing-pose"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, command: &str) -> Value {
    let text = fs::read_to_string(dir.join("out").join(format!("{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stdout_lines(o: &Output) -> Vec<String> {
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

/// The JSON report carries exactly the lines printed to stdout.
fn assert_mirrored(o: &Output, r: &Value) {
    let json_lines: Vec<String> = r["lines"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l.as_str().unwrap().to_owned())
        .collect();
    assert_eq!(stdout_lines(o), json_lines);
}

fn write_config(dir: &Path, name: &str, doc: &ScenarioDoc) -> String {
    let path = dir.join(name);
    fs::write(&path, doc.to_toml()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn validate_builtin_passes_and_reports_spectra() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["validate", "paper_sec5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "validate");
    assert_mirrored(&o, &r);
    assert_eq!(r["passed"], true);
    let f3 = &r["data"]["spectra"]["followers"][0];
    assert_eq!(f3["agent"], 3);
    let m: Vec<f64> = f3["m_eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let expected = [0.0, 1.0 - 0.5f64.sqrt(), 1.0 + 0.5f64.sqrt()];
    for (a, b) in m.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{m:?}");
    }
}

#[test]
fn validate_names_the_failed_clause() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = ScenarioDoc::parse(PAPER_SEC5).unwrap();
    let five = doc.agents.iter_mut().find(|a| a.id == Some(5)).unwrap();
    five.neighbors.truncate(1);
    five.edge_gains = None;
    let config = write_config(dir.path(), "one_neighbor.toml", &doc);
    let before = fs::read(&config).unwrap();
    let o = bin(&["validate", &config], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let r = report(dir.path(), "validate");
    assert_mirrored(&o, &r);
    assert_eq!(r["passed"], false);
    assert_eq!(r["data"]["violation"]["clause"], "at least two neighbors");
    assert!(stdout_lines(&o)[0].contains("at least two neighbors"));
    assert_eq!(fs::read(&config).unwrap(), before, "config must not be modified");
}

#[test]
fn unreadable_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["validate", "does/not/exist.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does/not/exist.toml"));
}

#[test]
fn zero_horizon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["run", "paper_sec5", "--horizon", "0.0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));
}

#[test]
fn zero_gain_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["run", "paper_sec5", "--k-r", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("k_r"));
}

fn assert_run_converged(dir: &Path, o: &Output) {
    let r = report(dir, "run");
    assert_mirrored(o, &r);
    let csv = fs::read_to_string(dir.join("out/timeseries.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 21);
    assert_eq!(csv.lines().count(), 3_002);
    let followers = r["data"]["summary"]["followers"].as_array().unwrap();
    assert_eq!(followers.len(), 6);
    for f in followers {
        assert_eq!(f["attitude_converged"], true, "{f}");
        assert_eq!(f["position_converged"], true, "{f}");
    }
    assert_eq!(r["passed"], true);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn run_writes_artifacts_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["run", "paper_sec5"], dir.path());
    assert_run_converged(dir.path(), &o);
}

#[test]
fn run_with_doubled_step_still_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["run", "paper_sec5", "--step", "2e-3", "--horizon", "30"], dir.path());
    let r = report(dir.path(), "run");
    assert_eq!(r["data"]["summary"]["step"], 2e-3);
    let csv = fs::read_to_string(dir.path().join("out/timeseries.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1_502);
    for f in r["data"]["summary"]["followers"].as_array().unwrap() {
        assert_eq!(f["attitude_converged"], true, "{f}");
        assert_eq!(f["position_converged"], true, "{f}");
    }
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn run_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    bin(&["run", "paper_sec5", "--horizon", "2"], a.path());
    bin(&["run", "paper_sec5", "--horizon", "2"], b.path());
    assert_eq!(
        fs::read(a.path().join("out/timeseries.csv")).unwrap(),
        fs::read(b.path().join("out/timeseries.csv")).unwrap()
    );
}

#[test]
fn equilibria_report_matches_stability_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["equilibria", "paper_sec5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "equilibria");
    assert_mirrored(&o, &r);
    let entries = r["data"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    for e in entries {
        let points = e["analysis"]["points"].as_array().unwrap();
        assert_eq!(points.len(), 4);
        assert_eq!(points[0]["equilibrium"]["kind"]["kind"], "desired");
        for p in points {
            assert!(p["equilibrium"]["residual"].as_f64().unwrap() <= 1e-10);
            assert_eq!(p["as_expected"], true);
        }
    }
    // Agent 8's bearing matrix has a repeated eigenvalue.
    assert!(entries[5]["precondition"].is_string());
    assert!(entries[..5].iter().all(|e| e["precondition"].is_null()));
}

#[test]
fn equilibria_spectra_scale_with_attitude_gain() {
    let eigenvalues = |k: &str| {
        let dir = tempfile::tempdir().unwrap();
        bin(&["equilibria", "paper_sec5", "--k-r", k], dir.path());
        let r = report(dir.path(), "equilibria");
        r["data"][0]["analysis"]["points"][0]["linearization"]["eigenvalues"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect::<Vec<_>>()
    };
    let one = eigenvalues("1");
    let three = eigenvalues("3");
    for (a, b) in one.iter().zip(&three) {
        assert!((3.0 * a - b).abs() < 1e-6, "{one:?} {three:?}");
    }
}

#[test]
fn equilibria_rejects_invalid_geometry_before_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = ScenarioDoc::parse(PAPER_SEC5).unwrap();
    // Agent 3 at (4, 0, 0) sees both leaders along the x axis.
    doc.agents.iter_mut().find(|a| a.id == Some(3)).unwrap().position = Some([4.0, 0.0, 0.0]);
    let config = write_config(dir.path(), "collinear.toml", &doc);
    let o = bin(&["equilibria", &config], dir.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-collinear"));
    assert!(!dir.path().join("out/equilibria.json").exists());
}

#[test]
fn sweep_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["sweep", "paper_sec5", "--trials", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_trial_sweep_is_reproducible() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let o = bin(&["sweep", "paper_sec5", "--trials", "1", "--seed", "7"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        let r = report(dir.path(), "sweep");
        assert_mirrored(&o, &r);
        r
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a["data"]["trials"], 1);
    assert_eq!(a["data"]["seed"], 7);
}

#[test]
fn sweep_of_hundred_trials_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["sweep", "paper_sec5", "--trials", "100", "--seed", "7"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "sweep");
    assert!(r["data"]["fraction"].as_f64().unwrap() >= 0.99);
    assert_eq!(r["data"]["planted"]["converged"], false);
}
