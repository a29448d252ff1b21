use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn confgauge(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confgauge")).arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_spec(dir: &Path, name: &str, n: usize, entry: impl Fn(usize, usize) -> String) -> String {
    let g: Vec<Vec<String>> = (0..n).map(|a| (0..n).map(|b| entry(a, b)).collect()).collect();
    let spec = serde_json::json!({ "name": name, "n": n, "box": vec![[-0.5, 0.5]; n], "g": g });
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, spec.to_string()).unwrap();
    path.display().to_string()
}

#[test]
fn flat_metrics_have_vanishing_curvature() {
    for spec in ["flat3", "flat4"] {
        let tmp = TempDir::new().unwrap();
        let o = confgauge(tmp.path(), &["--spec", spec, "--tol", "1e-12", "curvature", "--which", "all"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let doc = read_json(&tmp.path().join("curvature.json"));
        let sup = doc["max_abs"].as_object().unwrap();
        for q in ["christoffel", "riemann", "ricci", "scalar", "schouten", "weyl", "cotton", "bach"] {
            assert_eq!(sup[q].as_f64(), Some(0.0), "{spec}: {q}");
        }
        assert_eq!(sup.contains_key("obstruction"), spec == "flat4");
        assert_eq!(doc["pass"], true);
    }
}

#[test]
fn obstruction_outside_four_dimensions_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let spec = write_spec(tmp.path(), "flat6", 6, |a, b| if a == b { "1".into() } else { "0".into() });
    let o = confgauge(tmp.path(), &["--spec", &spec, "curvature", "--which", "ricci,obstruction"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported dimension 6"));
}

#[test]
fn round_sphere_has_scalar_curvature_six() {
    let tmp = TempDir::new().unwrap();
    let o =
        confgauge(tmp.path(), &["--spec", "sphere3", "--seed", "4", "curvature", "--which", "scalar", "--points", "8"]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&tmp.path().join("curvature.json"));
    let points = doc["points"].as_array().unwrap();
    assert_eq!(points.len(), 8);
    for p in points {
        assert!((p["scalar"].as_f64().unwrap() - 6.0).abs() < 1e-10, "{p}");
    }
    let csv = std::fs::read_to_string(tmp.path().join("curvature.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn certificates_pass_and_reject_zero_samples() {
    let tmp = TempDir::new().unwrap();
    let o = confgauge(tmp.path(), &["--spec", "flat4", "certify", "--samples", "500"]);
    assert_eq!(code(&o), 0);
    let cert = &read_json(&tmp.path().join("certificate.json"))["certificate"];
    assert_eq!(cert["pass"], true);
    assert!(cert["sigma_min"].as_f64().unwrap() > cert["threshold"].as_f64().unwrap());

    // constant SPD background with off-diagonal coupling
    let spec = write_spec(tmp.path(), "tilted", 4, |a, b| match (a, b) {
        _ if a == b => format!("{}", 1.0 + 0.5 * a as f64),
        (0, 1) | (1, 0) => "0.4".into(),
        (2, 3) | (3, 2) => "-0.3".into(),
        _ => "0".into(),
    });
    let o = confgauge(tmp.path(), &["--spec", &spec, "certify", "--at=0.1,-0.2,0.3,0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = confgauge(tmp.path(), &["--spec", "flat4", "certify", "--samples", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn gauge_check_separates_conformally_flat_from_generic() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&confgauge(tmp.path(), &["--spec", "conformal4", "gauge-check"])), 0);
    let o = confgauge(tmp.path(), &["--spec", "poly3", "gauge-check"]);
    assert_eq!(code(&o), 1);
    let doc = read_json(&tmp.path().join("gauge.json"));
    assert_eq!(doc["checks"][0]["target"].as_f64(), Some(1e-10));
}

#[test]
fn input_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&confgauge(tmp.path(), &["suite", "nonsense"])), 2);
    assert_eq!(code(&confgauge(tmp.path(), &["--spec", "missing-spec", "curvature"])), 2);
    assert_eq!(code(&confgauge(tmp.path(), &["curvature"])), 2);
    assert_eq!(code(&confgauge(tmp.path(), &["--spec", "sphere3", "curvature", "--at", "0.1,0.2"])), 2);
    assert_eq!(code(&confgauge(tmp.path(), &["--spec", "sphere3", "curvature", "--at", "0.1,0.2,0.9"])), 2);
    let bad = write_spec(tmp.path(), "bad", 3, |a, b| if a == b { "1 + sin(x1".into() } else { "0".into() });
    assert_eq!(code(&confgauge(tmp.path(), &["--spec", &bad, "curvature"])), 2);
    let indefinite = write_spec(tmp.path(), "indef", 3, |a, b| if a == b { "1 - 4*x1".into() } else { "0".into() });
    assert_eq!(code(&confgauge(tmp.path(), &["--spec", &indefinite, "curvature"])), 2);
    let cfg = tmp.path().join("solver.json");
    std::fs::write(&cfg, r#"{"grid": [9, 9, 9], "tolerance": 1e-6}"#).unwrap();
    let o = confgauge(tmp.path(), &["--spec", "poly3", "solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&confgauge(tmp.path(), &["smooth", "--r", "3.5"])), 2);
}

#[test]
fn solve_writes_a_converged_map() {
    let tmp = TempDir::new().unwrap();
    let o = confgauge(tmp.path(), &["--spec", "poly3", "solve", "--grid", "9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let doc = read_json(&tmp.path().join("solve.json"));
    assert_eq!(doc["report"]["status"], "converged");
    let energies: Vec<f64> =
        doc["report"]["energies"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
    let rows = std::fs::read_to_string(tmp.path().join("solution.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 9 * 9 * 9);
}

#[test]
fn smoothing_of_a_constant_symbol_fails_its_checks_but_still_reports() {
    let tmp = TempDir::new().unwrap();
    let o = confgauge(tmp.path(), &["smooth", "--amplitude", "0"]);
    assert_eq!(code(&o), 1);
    let doc = read_json(&tmp.path().join("smooth.json"));
    assert_eq!(doc["pass"], false);
    assert!(doc["rate"].is_null());
}

#[test]
fn smoothing_suite_passes() {
    let tmp = TempDir::new().unwrap();
    let o = confgauge(tmp.path(), &["suite", "smoothing"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let doc = read_json(&tmp.path().join("suite_smoothing.json"));
    assert_eq!(doc["report"]["pass"], true);
    for check in doc["report"]["criteria"][0]["checks"].as_array().unwrap() {
        assert!(check.get("target").is_some() && check.get("tolerance").is_some());
    }
}

#[test]
fn reports_embed_the_manifest_and_rerun_bit_identically() {
    let tmp = TempDir::new().unwrap();
    let args = ["--spec", "poly4", "--seed", "7", "curvature", "--which", "weyl,cotton,bach"];
    assert_eq!(code(&confgauge(tmp.path(), &args)), 0);
    let first_json = std::fs::read(tmp.path().join("curvature.json")).unwrap();
    let first_csv = std::fs::read(tmp.path().join("curvature.csv")).unwrap();
    assert_eq!(code(&confgauge(tmp.path(), &args)), 0);
    assert_eq!(std::fs::read(tmp.path().join("curvature.json")).unwrap(), first_json);
    assert_eq!(std::fs::read(tmp.path().join("curvature.csv")).unwrap(), first_csv);

    let doc = read_json(&tmp.path().join("curvature.json"));
    let m = &doc["manifest"];
    assert_eq!(m["command"], "curvature");
    assert_eq!(m["spec"], "poly4");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.iter().any(|p| p.ends_with("curvature.csv")));
    assert!(outputs.iter().any(|p| p.ends_with("curvature.json")));

    let other = TempDir::new().unwrap();
    let seeded = ["--spec", "poly4", "--seed", "8", "curvature", "--which", "weyl,cotton,bach"];
    assert_eq!(code(&confgauge(other.path(), &seeded)), 0);
    assert_ne!(std::fs::read(other.path().join("curvature.csv")).unwrap(), first_csv);
}

#[test]
fn json_flag_prints_the_report() {
    let tmp = TempDir::new().unwrap();
    let o = confgauge(tmp.path(), &["--spec", "flat3", "--json", "gauge-check", "--points", "2"]);
    assert_eq!(code(&o), 0);
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, read_json(&tmp.path().join("gauge.json")));
}
