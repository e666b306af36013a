use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use curvflow::config::build_shape;
use curvflow::{ExperimentConfig, SphereGrid};

fn curvflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvflow"))
        .args(args)
        .current_dir(dir)
        .env("CURVFLOW_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SPHERE: &str = "dimension = 2\nshape = \"sphere 1\"\nspeed = \"pow_mean,alpha=2\"\ndegree = 8\ncadence = 5\noutput = \"run\"\n";

#[test]
fn shape_then_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = curvflow(dir.path(), &["shape", "ellipsoid 1 1 1.1", "--degree", "10", "-o", "start.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["inside"].as_bool().unwrap());
    assert!(report["cone_margin"].as_f64().unwrap() > 0.0);

    let cfg = ExperimentConfig::from_toml(
        "dimension = 2\nshape = \"start.json\"\nspeed = \"pow_mean,alpha=2\"\ndegree = 10\n",
    )
    .unwrap();
    let loaded = cfg.initial_body(dir.path()).unwrap();
    let grid = std::sync::Arc::new(SphereGrid::sphere(10));
    let direct = build_shape("ellipsoid 1 1 1.1", grid, dir.path()).unwrap();
    assert_eq!(loaded.coefficients(), direct.coefficients());
}

#[test]
fn out_of_cone_shape_exits_with_precondition() {
    let dir = tempfile::tempdir().unwrap();
    let o = curvflow(
        dir.path(),
        &["shape", "sphere 1.0 + Y(4,0)*0.05", "--speed", "pow_mean,delta0=0.01", "-o", "s.json"],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("node"));
    assert!(!dir.path().join("s.json").exists());
}

#[test]
fn sphere_simulation_matches_closed_form_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sphere.toml"), SPHERE).unwrap();
    let o = curvflow(dir.path(), &["simulate", "sphere.toml"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv_path = dir.path().join("run/timeseries.csv");
    let first = fs::read(&csv_path).unwrap();
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let t = headers.iter().position(|h| h == "t").unwrap();
    let r = headers.iter().position(|h| h == "r_minus").unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let (t, r): (f64, f64) = (rec[t].parse().unwrap(), rec[r].parse().unwrap());
        let exact = (1.0 - 12.0 * t).cbrt();
        assert!((r - exact).abs() <= 1e-6 * exact, "t = {t}: {r} vs {exact}");
    }

    let o = curvflow(dir.path(), &["simulate", "sphere.toml"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&csv_path).unwrap(), first);

    let o = curvflow(dir.path(), &["verify", "flow", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("run/diagnostics.csv").exists());

    let o = curvflow(dir.path(), &["analyze", "run"]);
    assert_eq!(code(&o), 0);
    let a: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(a["lambda_hat"].is_null());
    for row in a["geombound"]["thresholds"].as_array().unwrap() {
        assert!(row[1].is_null() || row[1].as_f64().unwrap().is_infinite());
    }
    let geometry = fs::read_to_string(dir.path().join("run/geometry.csv")).unwrap();
    assert!(geometry.starts_with(
        "t,V_0,V_1,V_2,V_3,iso_ratio,r_minus,r_plus,ratio,diskant_lower,diskant_upper\n"
    ));
}

#[test]
fn jobs_fan_out_configs() {
    let dir = tempfile::tempdir().unwrap();
    for (name, r) in [("a", "1"), ("b", "0.8")] {
        let text = SPHERE
            .replace("sphere 1", &format!("sphere {r}"))
            .replace("output = \"run\"", &format!("output = \"{name}\""));
        fs::write(dir.path().join(format!("{name}.toml")), text).unwrap();
    }
    let o = curvflow(dir.path(), &["simulate", "a.toml", "b.toml", "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("a/summary.json").exists() && dir.path().join("b/summary.json").exists());
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "dimension = 2\nshape = \"sphere 1\"\nspeed = \"pow_bogus\"\ndegree = 8\n",
    )
    .unwrap();
    assert_eq!(code(&curvflow(dir.path(), &["simulate", "bad.toml"])), 2);
    assert_eq!(code(&curvflow(dir.path(), &["simulate", "missing.toml"])), 5);
    assert_eq!(code(&curvflow(dir.path(), &["analyze", "empty"])), 5);
    assert_eq!(code(&curvflow(dir.path(), &["verify", "flow", "empty"])), 5);
    assert_eq!(code(&curvflow(dir.path(), &["verify", "speeds", "pow_bogus"])), 2);
}

#[test]
fn verify_suites_report_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = curvflow(dir.path(), &["verify", "lemmas", "--samples", "2000"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 12);
    let o = curvflow(dir.path(), &["verify", "speeds", "pow_norm,alpha=2", "--samples", "2000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}
