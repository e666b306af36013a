//! Trajectory directories and the tabular outputs written into them.
//!
//! Layout: `config.toml`, `summary.json`, `timeseries.csv`,
//! `snapshots/snap_NNNNN.json`, and after analysis `geometry.csv`,
//! `geombound.csv`, `c1.csv`, `analysis.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, MonitorConfig};
use crate::error::{Error, Result};
use crate::flow::{diskant_series, Flow, RunStatus, Trajectory};
use crate::geometry::{geombound_check, GeomboundTable};
use crate::snapshot::Snapshot;
use crate::spectral::Vec3;
use crate::verify::{
    pinching_monitors, smoczyk_monitor, speed_lowerbound_fit, tso_series, PinchingReport, SmoczykReport, SpeedFit,
    TsoReport,
};

/// Floor on the default `σ` so an exactly round start still has a
/// meaningful `Z_σ` tolerance.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// `σ` from the config, else 1.05 × the initial `max ‖Å‖²/H²`.
pub fn resolve_sigma(traj: &Trajectory, monitors: &MonitorConfig) -> f64 {
    monitors
        .sigma
        .unwrap_or_else(|| (1.05 * traj.snapshots[0].summary.pinch_max).max(SIGMA_FLOOR))
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub pinching: PinchingReport,
    pub tso: TsoReport,
    pub smoczyk: SmoczykReport,
}

/// Monitors along the whole run; Smoczyk's margin is taken about `p̂`.
pub fn diagnose(traj: &Trajectory, monitors: &MonitorConfig) -> Result<Diagnostics> {
    let sigma = resolve_sigma(traj, monitors);
    Ok(Diagnostics {
        pinching: pinching_monitors(traj, sigma, monitors.sigma0, &monitors.epsilons)?,
        tso: tso_series(traj, sigma)?,
        smoczyk: smoczyk_monitor(traj, 0, &traj.p_hat)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub ratio: f64,
    /// `V_1, …, V_{n+1}`.
    pub volumes: Vec<f64>,
    pub iso_ratio: f64,
    pub h_max: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub pinch_max: f64,
    pub z_sigma_max: Option<f64>,
    pub q_max: Option<f64>,
    pub smoczyk_min: Option<f64>,
}

pub fn timeseries_rows(traj: &Trajectory, diag: Option<&Diagnostics>) -> Vec<TimeSeriesRow> {
    traj.snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| TimeSeriesRow {
            t: s.t,
            r_minus: s.radii.r_minus,
            r_plus: s.radii.r_plus,
            ratio: s.radii.ratio(),
            volumes: s.volumes.v[1..].to_vec(),
            iso_ratio: s.volumes.iso_ratio(),
            h_max: s.summary.h_max,
            f_min: s.summary.f_min,
            f_max: s.summary.f_max,
            pinch_max: s.summary.pinch_max,
            z_sigma_max: diag.map(|d| d.pinching.rows[i].z_sigma_max),
            q_max: diag.map(|d| d.tso.rows[i].q_max),
            smoczyk_min: diag.map(|d| d.smoczyk.rows[i].1),
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn timeseries_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "r_minus", "r_plus", "ratio"].map(String::from).to_vec();
    h.extend((1..=n + 1).map(|k| format!("V_{k}")));
    h.extend(
        [
            "iso_ratio",
            "H_max",
            "F_min",
            "F_max",
            "pinch_max",
            "Z_sigma_max",
            "Q_max",
            "smoczyk_min",
        ]
        .map(String::from),
    );
    h
}

pub fn write_timeseries(path: &Path, n: usize, rows: &[TimeSeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(timeseries_header(n))?;
    for r in rows {
        let mut rec = vec![num(r.t), num(r.r_minus), num(r.r_plus), num(r.ratio)];
        rec.extend(r.volumes.iter().copied().map(num));
        rec.extend([num(r.iso_ratio), num(r.h_max), num(r.f_min), num(r.f_max), num(r.pinch_max)]);
        rec.extend([opt(r.z_sigma_max), opt(r.q_max), opt(r.smoczyk_min)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: RunStatus,
    pub steps: usize,
    pub t_hat: f64,
    pub p_hat: Vec3,
    pub c_f: f64,
    pub alpha: f64,
    pub speed: String,
    pub dim: usize,
    pub degree: usize,
    pub sigma: Option<f64>,
    pub snapshots: Vec<SnapshotEntry>,
}

fn snapshot_file(index: usize) -> String {
    format!("snapshots/snap_{index:05}.json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Write everything a later `load_trajectory` needs, plus the time series.
pub fn write_trajectory(
    dir: &Path,
    config: &ExperimentConfig,
    traj: &Trajectory,
    diag: Option<&Diagnostics>,
) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    let mut entries = Vec::with_capacity(traj.snapshots.len());
    for (i, s) in traj.snapshots.iter().enumerate() {
        let file = snapshot_file(i);
        Snapshot::capture(&s.body, s.t).save(dir.join(&file))?;
        entries.push(SnapshotEntry {
            step: s.step,
            t: s.t,
            dt: s.dt,
            file,
        });
    }
    let summary = Summary {
        status: traj.status.clone(),
        steps: traj.steps,
        t_hat: traj.t_hat,
        p_hat: traj.p_hat,
        c_f: traj.c_f,
        alpha: traj.alpha,
        speed: traj.speed.describe(),
        dim: traj.dim,
        degree: config.degree,
        sigma: diag.map(|d| d.pinching.sigma),
        snapshots: entries,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_timeseries(&dir.join("timeseries.csv"), traj.dim, &timeseries_rows(traj, diag))
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    let text = fs::read_to_string(dir.join("summary.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuild a trajectory from its directory; snapshot diagnostics are
/// recomputed from the stored states and match the original run.
pub fn load_trajectory(dir: &Path) -> Result<(ExperimentConfig, Trajectory)> {
    let config = ExperimentConfig::load(dir.join("config.toml"))?;
    let summary = read_summary(dir)?;
    let flow = Flow::new(config.flow_config()?, config.dimension)?;
    let snapshots = summary
        .snapshots
        .iter()
        .map(|e| {
            let body = Snapshot::load(dir.join(&e.file))?.body(Some(flow.grid().clone()))?;
            flow.observe(e.step, e.t, e.dt, &body)
        })
        .collect::<Result<Vec<_>>>()?;
    let traj = flow.assemble(snapshots, summary.status, summary.steps)?;
    Ok((config, traj))
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub sigma: f64,
    pub lambda_hat: Option<f64>,
    pub qualifying: usize,
    pub lambda_admissible: Option<f64>,
    pub late_decreasing: bool,
    /// `(ε, Ĉ₁(ε))`.
    pub c1: Vec<(f64, f64)>,
    pub geombound: GeomboundTable,
    pub speed_fit: Option<SpeedFit>,
    /// Why the speed fit is missing, if it is.
    pub speed_fit_note: Option<String>,
}

pub fn analyze(traj: &Trajectory, monitors: &MonitorConfig) -> Result<Analysis> {
    let sigma = resolve_sigma(traj, monitors);
    let pinching = pinching_monitors(traj, sigma, monitors.sigma0, &monitors.epsilons)?;
    let radii: Vec<_> = traj.snapshots.iter().map(|s| s.radii).collect();
    let (speed_fit, speed_fit_note) = match speed_lowerbound_fit(traj) {
        Ok(f) => (Some(f), None),
        Err(Error::Insufficient(m)) => (None, Some(m)),
        Err(e) => return Err(e),
    };
    Ok(Analysis {
        sigma,
        lambda_hat: pinching.lambda_hat,
        qualifying: pinching.qualifying,
        lambda_admissible: pinching.lambda_admissible,
        late_decreasing: pinching.late_decreasing,
        c1: pinching.c1,
        geombound: geombound_check(&radii, &monitors.rhos),
        speed_fit,
        speed_fit_note,
    })
}

/// Per-snapshot integral geometry: `t, V_0…V_{n+1}, iso_ratio, r_minus,
/// r_plus, ratio, diskant_lower, diskant_upper`.
pub fn write_geometry(path: &Path, traj: &Trajectory) -> Result<()> {
    let n = traj.dim;
    let diskant = diskant_series(traj)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..=n + 1).map(|k| format!("V_{k}")));
    header.extend(
        ["iso_ratio", "r_minus", "r_plus", "ratio", "diskant_lower", "diskant_upper"].map(String::from),
    );
    w.write_record(&header)?;
    for (s, d) in traj.snapshots.iter().zip(&diskant) {
        let mut rec = vec![num(s.t)];
        rec.extend(s.volumes.v.iter().copied().map(num));
        rec.extend([
            num(s.volumes.iso_ratio()),
            num(s.radii.r_minus),
            num(s.radii.r_plus),
            num(s.radii.ratio()),
            num(d.1),
            num(d.2),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_analysis(dir: &Path, traj: &Trajectory, analysis: &Analysis) -> Result<()> {
    write_geometry(&dir.join("geometry.csv"), traj)?;
    let mut w = csv::Writer::from_path(dir.join("geombound.csv"))?;
    w.write_record(["rho", "C2_hat"])?;
    for (rho, c2) in &analysis.geombound.thresholds {
        w.write_record([num(*rho), num(*c2)])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("c1.csv"))?;
    w.write_record(["epsilon", "C1_hat"])?;
    for (e, c1) in &analysis.c1 {
        w.write_record([num(*e), num(*c1)])?;
    }
    w.flush()?;
    write_json(&dir.join("analysis.json"), analysis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_config(out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_toml(
            "dimension = 2\nshape = \"sphere 1\"\nspeed = \"pow_mean,alpha=2\"\ndegree = 6\ncadence = 5\nstop_fraction = 0.5\n",
        )
        .unwrap();
        cfg.output = out.to_path_buf();
        cfg
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = sphere_config(dir.path());
        let flow = Flow::new(cfg.flow_config().unwrap(), 2).unwrap();
        let traj = flow.run(&cfg.initial_body(Path::new(".")).unwrap()).unwrap();
        let diag = diagnose(&traj, &cfg.monitors).unwrap();
        write_trajectory(dir.path(), &cfg, &traj, Some(&diag)).unwrap();
        let (cfg2, back) = load_trajectory(dir.path()).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(back.t_hat, traj.t_hat);
        assert_eq!(back.p_hat, traj.p_hat);
        assert_eq!(back.snapshots.len(), traj.snapshots.len());
        for (a, b) in back.snapshots.iter().zip(&traj.snapshots) {
            assert_eq!(a.body.coefficients(), b.body.coefficients());
            assert_eq!(a.summary, b.summary);
        }
        let text = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "t,r_minus,r_plus,ratio,V_1,V_2,V_3,iso_ratio,H_max,F_min,F_max,pinch_max,Z_sigma_max,Q_max,smoczyk_min"
        );
        let analysis = analyze(&back, &cfg.monitors).unwrap();
        assert!(analysis.geombound.thresholds.iter().all(|t| t.1.is_infinite()));
        assert!(analysis.lambda_hat.is_none());
        write_analysis(dir.path(), &back, &analysis).unwrap();
        assert!(dir.path().join("geometry.csv").exists());
    }

    #[test]
    fn missing_directory_is_io_error() {
        assert!(matches!(load_trajectory(Path::new("/nonexistent/run")), Err(Error::Io(_))));
    }
}
