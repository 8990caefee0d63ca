use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;

const SEMICIRCLE: &str =
    r#"{"b0":{"dim":1,"entries":[[[0,0]]]},"eta":{"dim":1,"repr":{"kind":"kraus","matrices":[{"dim":1,"entries":[[[1,0]]]}]}}}"#;

fn dyson(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyson")).current_dir(dir).env("RUST_LOG", "warn").args(args).output().expect("binary runs")
}

fn semicircle_density(t: f64, eps: f64) -> f64 {
    let z = Complex64::new(t, eps);
    let r = (z * z - 4.0).sqrt();
    let g = if ((z - r) / 2.0).im <= 0.0 { (z - r) / 2.0 } else { (z + r) / 2.0 };
    -g.im / PI
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("semi.json"), SEMICIRCLE).unwrap();
    dir
}

#[test]
fn dos_matches_closed_form() {
    let dir = setup();
    let out = dyson(dir.path(), &["dos", "--input", "semi.json", "--epsilon", "0.05", "--grid", "601", "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim_end(), dir.path().join("d.csv").canonicalize().unwrap().display().to_string());
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,density"));
    let mut worst = 0.0f64;
    let mut rows = 0;
    for line in lines {
        let (t, v) = line.split_once(',').unwrap();
        let (t, v): (f64, f64) = (t.parse().unwrap(), v.parse().unwrap());
        worst = worst.max((v - semicircle_density(t, 0.05)).abs());
        rows += 1;
    }
    assert_eq!(rows, 601);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn verify_holder_suite_passes() {
    let dir = setup();
    let out = dyson(dir.path(), &["verify", "--suite", "holder", "--seed", "7", "--out", "v.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert_eq!(r["verdict"], "pass");
        assert_eq!(r["instances"], 100);
    }
}

#[test]
fn malformed_input_exits_2_without_output() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.json"), "{\"b0\": [1, 2").unwrap();
    let out = dyson(dir.path(), &["dos", "--input", "bad.json", "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[input]"));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "{names:?}");
    let out = dyson(dir.path(), &["dos", "--input", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dyson(dir.path(), &["verify", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dyson(dir.path(), &["dos", "--input", "semi.json", "--window", "1:-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("dos.csv").exists());
}

#[test]
fn non_convergence_exits_3() {
    let dir = setup();
    let out = dyson(dir.path(), &["dos", "--input", "semi.json", "--grid", "3", "--max-iter", "2", "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("d.csv").exists());
}

#[test]
fn threshold_violation_exits_1_and_keeps_the_report() {
    let dir = setup();
    let out = dyson(
        dir.path(),
        &["randmat", "--fixture", "semicircle", "--n", "30", "--trials", "2", "--grid", "201", "--threshold", "0", "--out", "r.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["N"], 30);
    assert!(report["levy"].as_f64().unwrap() > 0.0);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = setup();
    for (a, b, args) in [
        ("d1.csv", "d2.csv", vec!["dos", "--input", "semi.json", "--grid", "201"]),
        ("r1.json", "r2.json", vec!["randmat", "--fixture", "pauli", "--n", "20", "--trials", "3", "--grid", "201", "--seed", "9"]),
        ("v1.json", "v2.json", vec!["verify", "--suite", "comparison", "--instances", "10", "--seed", "4"]),
    ] {
        for f in [a, b] {
            let mut full = args.clone();
            full.extend(["--out", f]);
            assert_eq!(dyson(dir.path(), &full).status.code(), Some(0));
        }
        assert_eq!(std::fs::read(dir.path().join(a)).unwrap(), std::fs::read(dir.path().join(b)).unwrap());
    }
}

#[test]
fn flags_override_config_file() {
    let dir = setup();
    std::fs::write(dir.path().join("cfg.json"), r#"{"epsilon": 0.3, "grid": 21}"#).unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["dos", "--input", "semi.json", "--out", out];
        args.extend_from_slice(extra);
        assert_eq!(dyson(dir.path(), &args).status.code(), Some(0));
        std::fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let mixed = run(&["--config", "cfg.json", "--epsilon", "0.1"], "a.csv");
    let plain = run(&["--epsilon", "0.1", "--grid", "21"], "b.csv");
    let config_only = run(&["--config", "cfg.json"], "c.csv");
    assert_eq!(mixed, plain);
    assert_ne!(mixed, config_only);
    std::fs::write(dir.path().join("typo.json"), r#"{"epsilom": 0.3}"#).unwrap();
    assert_eq!(dyson(dir.path(), &["dos", "--input", "semi.json", "--config", "typo.json"]).status.code(), Some(2));
}

#[test]
fn matrix_commands_run() {
    let dir = setup();
    let p = dir.path();
    let eta = r#"{"dim":1,"repr":{"kind":"kraus","matrices":[{"dim":1,"entries":[[[1,0]]]}]}}"#;
    let eta1 = r#"{"dim":1,"repr":{"kind":"kraus","matrices":[{"dim":1,"entries":[[[1.05,0]]]}]}}"#;
    std::fs::write(p.join("eta.json"), eta).unwrap();
    std::fs::write(p.join("eta1.json"), eta1).unwrap();
    std::fs::write(p.join("b.json"), r#"{"dim":1,"entries":[[[0.2,1.0]]]}"#).unwrap();
    std::fs::write(p.join("h.json"), r#"{"dim":1,"entries":[[[1,0]]]}"#).unwrap();

    assert_eq!(dyson(p, &["derivative", "--eta", "eta.json", "--b", "b.json", "--h", "h.json"]).status.code(), Some(0));
    let d: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("derivative.json")).unwrap()).unwrap();
    assert!(d["route_gap"].as_f64().unwrap() < 1e-9);

    assert_eq!(dyson(p, &["subordinate", "--eta0", "eta.json", "--eta1", "eta1.json", "--b0", "b.json"]).status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("subordinate.json")).unwrap()).unwrap();
    assert_eq!(s["admissible"], true);

    assert_eq!(dyson(p, &["evolve", "--eta0", "eta.json", "--eta1", "eta1.json", "--points", "2", "--times", "0.4,0.6"]).status.code(), Some(0));
    let e: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("evolve.json")).unwrap()).unwrap();
    assert_eq!(e["samples"].as_array().unwrap().len(), 4);

    assert_eq!(dyson(p, &["cauchy", "--input", "semi.json", "--z", "0,1"]).status.code(), Some(0));
    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("cauchy.json")).unwrap()).unwrap();
    assert!((c[0]["value"][1].as_f64().unwrap() + 0.618_033_988_749_895).abs() < 1e-11);
}
