//! Trajectory monitors: pinching, Tso's speed bound, Smoczyk's margin and
//! the speed lower-bound exponent.

use std::sync::Arc;

use serde::Serialize;

use crate::body::{curvature, CurvatureField, SupportFunction};
use crate::error::{Error, Result};
use crate::flow::{FlowSnapshot, Trajectory};
use crate::spectral::{SphereGrid, Vec3};
use crate::speeds::evaluate;

/// Snapshot resampled on the doubled grid used for the speed.
pub struct FineState {
    pub body: SupportFunction,
    pub curv: CurvatureField,
    pub speed: Vec<f64>,
}

pub fn fine_grid(traj: &Trajectory) -> Result<Arc<SphereGrid>> {
    let degree = traj.last().body.grid().degree();
    Ok(Arc::new(SphereGrid::new(traj.dim, 2 * degree)?))
}

pub fn fine_state(traj: &Trajectory, snap: &FlowSnapshot, grid: &Arc<SphereGrid>) -> Result<FineState> {
    let body = SupportFunction::from_coefficients(snap.body.coefficients(), grid.clone())?;
    let curv = curvature(&body)?;
    let speed = evaluate(&traj.speed, &curv).value;
    Ok(FineState { body, curv, speed })
}

/// Least-squares `(slope, intercept)` of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `max ‖Å‖²/H²` at or below this is rounding noise of a round body.
pub const PINCH_NOISE: f64 = 1e-24;

#[derive(Debug, Clone, Serialize)]
pub struct PinchingRow {
    pub t: f64,
    pub h_max: f64,
    /// `max ‖Å‖²/H²`.
    pub pinch_max: f64,
    /// `max (‖Å‖² − σH²)`.
    pub z_sigma_max: f64,
    pub z_tolerance: f64,
    /// Largest `λ` with `‖Å‖² ≤ σ₀ H^{2−λ} 𝔥^λ` at every node where `H > 𝔥`.
    pub lambda_admissible: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PinchingReport {
    pub sigma: f64,
    pub sigma0: f64,
    pub rows: Vec<PinchingRow>,
    /// Snapshots with `Z_σ` above tolerance.
    pub z_violations: usize,
    /// Decay exponent of the pinching ratio against curvature growth.
    pub lambda_hat: Option<f64>,
    pub qualifying: usize,
    /// `pinch_max` strictly decreasing over the second half of the run.
    pub late_decreasing: bool,
    /// `(ε, max over nodes and snapshots of κ_n − (1+ε)κ_1)`.
    pub c1: Vec<(f64, f64)>,
    /// Smallest per-snapshot admissible `λ` over the run.
    pub lambda_admissible: Option<f64>,
}

/// `σ₀` defaults to `σ` when not given.
pub fn pinching_monitors(
    traj: &Trajectory,
    sigma: f64,
    sigma0: Option<f64>,
    epsilons: &[f64],
) -> Result<PinchingReport> {
    let sigma0 = sigma0.unwrap_or(sigma);
    let grid = fine_grid(traj)?;
    let mut h0 = None;
    let n = traj.dim;
    let mut rows = Vec::with_capacity(traj.snapshots.len());
    let mut c1 = vec![f64::NEG_INFINITY; epsilons.len()];
    for snap in &traj.snapshots {
        let st = fine_state(traj, snap, &grid)?;
        let c = &st.curv;
        let h0 = *h0.get_or_insert_with(|| c.max_mean());
        let mut z = f64::NEG_INFINITY;
        let mut admissible: Option<f64> = None;
        for i in 0..c.len() {
            let h = c.mean[i];
            if h > h0 {
                let lam = (sigma0 * h * h / c.traceless2[i]).ln() / (h / h0).ln();
                admissible = Some(admissible.map_or(lam, |a| a.min(lam)));
            }
            z = z.max(c.traceless2[i] - sigma * c.mean[i] * c.mean[i]);
            let k = c.kappa(i);
            for (e, out) in epsilons.iter().zip(c1.iter_mut()) {
                *out = out.max(k[n - 1] - (1.0 + e) * k[0]);
            }
        }
        let h_max = c.max_mean();
        rows.push(PinchingRow {
            t: snap.t,
            h_max,
            pinch_max: c.pinch_max(),
            z_sigma_max: z,
            z_tolerance: 1e-10 * sigma * h_max * h_max,
            lambda_admissible: admissible,
        });
    }
    let z_violations = rows.iter().filter(|r| !(r.z_sigma_max <= r.z_tolerance)).count();
    let h0 = rows[0].h_max;
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.h_max >= h0 && r.pinch_max > PINCH_NOISE)
        .map(|r| ((r.h_max / h0).ln(), r.pinch_max.ln()))
        .unzip();
    let qualifying = x.len();
    let lambda_hat = (qualifying >= 5).then(|| -linear_fit(&x, &y).0).filter(|l| l.is_finite());
    let late_decreasing = rows[rows.len() / 2..].windows(2).all(|w| w[1].pinch_max < w[0].pinch_max);
    let lambda_admissible = rows
        .iter()
        .filter_map(|r| r.lambda_admissible)
        .reduce(f64::min);
    Ok(PinchingReport {
        sigma,
        sigma0,
        lambda_admissible,
        z_violations,
        lambda_hat,
        qualifying,
        late_decreasing,
        c1: epsilons.iter().copied().zip(c1).collect(),
        rows,
    })
}

/// `α(1−√(n(n−1)σ)) / (n(1+√(n(n−1)σ)))`.
pub fn tso_constant(n: usize, alpha: f64, sigma: f64) -> f64 {
    let nf = n as f64;
    let root = (nf * (nf - 1.0) * sigma).sqrt();
    alpha * (1.0 - root) / (nf * (1.0 + root))
}

/// Upper bound for `Q` a time `elapsed` after the window start.
pub fn tso_bound(alpha: f64, c_tilde: f64, r0: f64, elapsed: f64) -> f64 {
    let a = (2.0 * (1.0 + alpha) / c_tilde).powf(alpha) * r0.powf(-(1.0 + alpha));
    let b = ((1.0 + alpha) * c_tilde / (2.0 * alpha)).powf(-alpha / (1.0 + alpha))
        * r0.recip()
        * elapsed.powf(-alpha / (1.0 + alpha));
    a.max(b)
}

#[derive(Debug, Clone, Serialize)]
pub struct TsoRow {
    pub t: f64,
    pub q_max: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TsoWindow {
    pub start: usize,
    pub end: usize,
    /// Incenter of the end snapshot and its inradius.
    pub centre: Vec3,
    pub r0: f64,
    pub rows: Vec<TsoRow>,
    pub violations: usize,
}

struct NodeData {
    t: f64,
    s: Vec<f64>,
    f: Vec<f64>,
}

fn node_data(traj: &Trajectory) -> Result<(Arc<SphereGrid>, Vec<NodeData>)> {
    let grid = fine_grid(traj)?;
    let data = traj
        .snapshots
        .iter()
        .map(|snap| {
            let st = fine_state(traj, snap, &grid)?;
            Ok(NodeData {
                t: snap.t,
                s: st.body.values().to_vec(),
                f: st.speed,
            })
        })
        .collect::<Result<_>>()?;
    Ok((grid, data))
}

fn window(
    traj: &Trajectory,
    grid: &SphereGrid,
    data: &[NodeData],
    start: usize,
    end: usize,
    c_tilde: f64,
) -> Result<TsoWindow> {
    if !(start <= end && end < data.len()) {
        return Err(Error::Range(format!("window {start}..={end} out of {} snapshots", data.len())));
    }
    let radii = &traj.snapshots[end].radii;
    let (centre, r0) = (radii.incenter, radii.r_minus);
    let mut rows = Vec::with_capacity(end - start + 1);
    for d in &data[start..=end] {
        let mut q_max = f64::NEG_INFINITY;
        for (i, u) in grid.nodes().iter().enumerate() {
            let denom = 2.0 * (d.s[i] - dot(&centre, u)) - r0;
            if !(denom > 0.0) {
                return Err(Error::Precondition(format!(
                    "2<X,nu> - r0 = {denom:e} at t = {}, node {i}: the end-time insphere is not enclosed",
                    d.t
                )));
            }
            q_max = q_max.max(d.f[i] / denom);
        }
        let elapsed = d.t - data[start].t;
        rows.push(TsoRow {
            t: d.t,
            q_max,
            bound: tso_bound(traj.alpha, c_tilde, r0, elapsed),
        });
    }
    let violations = rows.iter().filter(|r| !(r.q_max <= r.bound)).count();
    Ok(TsoWindow {
        start,
        end,
        centre,
        r0,
        rows,
        violations,
    })
}

/// Tso's bound on `[t_start, t_end]`, with the origin at the incenter of
/// the end snapshot so every earlier body encloses the insphere.
pub fn tso_monitor(traj: &Trajectory, start: usize, end: usize, sigma: f64) -> Result<TsoWindow> {
    let (grid, data) = node_data(traj)?;
    window(traj, &grid, &data, start, end, tso_constant(traj.dim, traj.alpha, sigma))
}

#[derive(Debug, Clone, Serialize)]
pub struct TsoReport {
    pub sigma: f64,
    pub c_tilde: f64,
    /// `Q` at each snapshot on the window ending there.
    pub rows: Vec<TsoRow>,
    /// Snapshot pairs checked and bound violations among them.
    pub checked: usize,
    pub violations: usize,
    /// Largest `Q/bound` over all checks.
    pub worst_ratio: f64,
}

/// Every window `[0, b]`, each checked at all of its snapshots.
pub fn tso_series(traj: &Trajectory, sigma: f64) -> Result<TsoReport> {
    let (grid, data) = node_data(traj)?;
    let c_tilde = tso_constant(traj.dim, traj.alpha, sigma);
    let mut rows = vec![TsoRow {
        t: data[0].t,
        q_max: f64::NAN,
        bound: f64::INFINITY,
    }];
    let (mut checked, mut violations, mut worst) = (0, 0, 0.0f64);
    for end in 0..data.len() {
        let w = window(traj, &grid, &data, 0, end, c_tilde)?;
        checked += w.rows.len();
        violations += w.violations;
        worst = w.rows.iter().map(|r| r.q_max / r.bound).fold(worst, f64::max);
        let last = w.rows.last().unwrap().clone();
        if end == 0 {
            rows[0] = last;
        } else {
            rows.push(last);
        }
    }
    Ok(TsoReport {
        sigma,
        c_tilde,
        rows,
        checked,
        violations,
        worst_ratio: worst,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoczykReport {
    pub t0: f64,
    pub point: Vec3,
    /// `(t, min ⟨X − p, ν⟩ + (1+α)(t − t₀)F)`.
    pub rows: Vec<(f64, f64)>,
    pub min_margin: f64,
}

/// Smoczyk's margin from snapshot `t0_index` about a point `p` enclosed by it.
pub fn smoczyk_monitor(traj: &Trajectory, t0_index: usize, p: &Vec3) -> Result<SmoczykReport> {
    let (grid, data) = node_data(traj)?;
    let first = data
        .get(t0_index)
        .ok_or_else(|| Error::Range(format!("snapshot {t0_index} out of {}", data.len())))?;
    let scale = first.s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, u) in grid.nodes().iter().enumerate() {
        let gap = first.s[i] - dot(p, u);
        if gap < -1e-12 * scale {
            return Err(Error::Precondition(format!(
                "point {p:?} is not enclosed at t = {}: s - <p,u> = {gap:e} at node {i}",
                first.t
            )));
        }
    }
    let t0 = first.t;
    let rows: Vec<(f64, f64)> = data[t0_index..]
        .iter()
        .map(|d| {
            let m = grid
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, u)| d.s[i] - dot(p, u) + (1.0 + traj.alpha) * (d.t - t0) * d.f[i])
                .fold(f64::INFINITY, f64::min);
            (d.t, m)
        })
        .collect();
    let min_margin = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(SmoczykReport {
        t0,
        point: *p,
        rows,
        min_margin,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedFit {
    /// Expected near `−α/(1+α)`.
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fit `log min F` against `log(T̂ − t)` over the last 30% of snapshots.
pub fn speed_lowerbound_fit(traj: &Trajectory) -> Result<SpeedFit> {
    let s = &traj.snapshots;
    let from = s.len() - (3 * s.len()) / 10;
    let (x, y): (Vec<f64>, Vec<f64>) = s[from..]
        .iter()
        .filter(|snap| snap.t < traj.t_hat)
        .map(|snap| ((traj.t_hat - snap.t).ln(), snap.summary.f_min.ln()))
        .unzip();
    if x.len() < 5 {
        return Err(Error::Insufficient(format!(
            "speed fit needs 5 late snapshots before the extinction estimate, found {}",
            x.len()
        )));
    }
    let (slope, intercept) = linear_fit(&x, &y);
    Ok(SpeedFit {
        slope,
        intercept,
        points: x.len(),
    })
}
