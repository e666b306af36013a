//! Contracting flow by a speed of the curvature, `∂s/∂t = −F(κ(s))`, in the
//! Gauss-map parametrisation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::body::{curvature, pinching_status, CurvatureField, SupportFunction};
use crate::error::{Error, Result};
use crate::geometry::{diskant_bounds, direct_radii, direct_radii_lp, mixed_volumes, MixedVolumes, RadiusReport};
use crate::spectral::{analyze_values, SphereGrid, Vec3};
use crate::speeds::{evaluate, SpeedEvaluation, SpeedSpec};

/// Step-size halvings allowed after a failed stage before giving up.
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub speed: SpeedSpec,
    /// Spectral degree `L` of the state.
    pub degree: usize,
    pub c_safe: f64,
    /// Evaluate the speed on a degree-`2L` grid before projecting back.
    pub dealias: bool,
    /// Stop once `r_−` falls below this fraction of its initial value.
    pub stop_fraction: f64,
    pub max_steps: usize,
    /// Steps between snapshots.
    pub cadence: usize,
    /// Overrides the adaptive step.
    pub fixed_dt: Option<f64>,
    /// Stop at this time; the last step is shortened to land on it.
    pub end_time: Option<f64>,
}

impl FlowConfig {
    pub fn new(speed: SpeedSpec, degree: usize) -> Self {
        Self {
            speed,
            degree,
            c_safe: 0.2,
            dealias: true,
            stop_fraction: 0.1,
            max_steps: 1_000_000,
            cadence: 10,
            fixed_dt: None,
            end_time: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSummary {
    pub h_max: f64,
    pub h_min: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// `max ‖Å‖²/H²`.
    pub pinch_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
}

impl CurvatureSummary {
    fn new(curv: &CurvatureField, speed: &SpeedEvaluation) -> Self {
        let fold = |v: &mut dyn Iterator<Item = f64>| {
            v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        let (h_min, h_max) = fold(&mut curv.mean.iter().copied());
        let (f_min, f_max) = fold(&mut speed.value.iter().copied());
        let n = curv.dim();
        let (kappa_min, kappa_max) = fold(&mut curv.kappa.iter().flat_map(|k| k[..n].iter().copied()));
        Self {
            h_max,
            h_min,
            f_min,
            f_max,
            pinch_max: curv.pinch_max(),
            kappa_min,
            kappa_max,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowSnapshot {
    pub step: usize,
    pub t: f64,
    /// Step size used to reach this state (zero for the initial one).
    pub dt: f64,
    pub body: SupportFunction,
    pub summary: CurvatureSummary,
    pub radii: RadiusReport,
    pub volumes: MixedVolumes,
    /// `−((n+1)/|Sⁿ|) ∫ F det R`, the exact rate of change of `V_{n+1}`.
    pub volume_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    /// `r_−` reached the stop fraction.
    Threshold,
    /// Step budget exhausted.
    Budget,
    /// Reached the requested end time.
    EndTime,
    /// Left the pinching cone of the speed.
    ConeExit { t: f64, node: usize, ratio: f64 },
    /// Step halving could not restore convexity.
    StepFailure { t: f64, message: String },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub speed: SpeedSpec,
    pub alpha: f64,
    pub c_f: f64,
    pub snapshots: Vec<FlowSnapshot>,
    pub status: RunStatus,
    pub steps: usize,
    /// Extinction-time estimate.
    pub t_hat: f64,
    /// Incenter of the final state.
    pub p_hat: Vec3,
}

impl Trajectory {
    pub fn cone_exit(&self) -> bool {
        matches!(self.status, RunStatus::ConeExit { .. })
    }

    pub fn last(&self) -> &FlowSnapshot {
        self.snapshots.last().expect("a trajectory holds at least the initial state")
    }

    /// `R(t) = ((1+α) c_f (T̂ − t))^{1/(1+α)}`.
    pub fn sphere_radius(&self, t: f64) -> Result<f64> {
        let gap = self.t_hat - t;
        if !(gap > 0.0) {
            return Err(Error::Range(format!("t = {t} is not before the extinction estimate {}", self.t_hat)));
        }
        Ok(((1.0 + self.alpha) * self.c_f * gap).powf(1.0 / (1.0 + self.alpha)))
    }

    /// Lifetime of a sphere of radius `r`.
    pub fn sphere_lifetime(&self, r: f64) -> f64 {
        sphere_lifetime(r, self.alpha, self.c_f)
    }
}

pub fn sphere_lifetime(r: f64, alpha: f64, c_f: f64) -> f64 {
    r.powf(1.0 + alpha) / ((1.0 + alpha) * c_f)
}

/// State of the flow evaluated on the speed grid.
struct Evaluated {
    curv: CurvatureField,
    speed: SpeedEvaluation,
    body: SupportFunction,
}

pub struct Flow {
    config: FlowConfig,
    grid: Arc<SphereGrid>,
    eval_grid: Arc<SphereGrid>,
    c_f: f64,
    delta0: f64,
}

impl Flow {
    pub fn new(config: FlowConfig, dim: usize) -> Result<Self> {
        config.speed.validate_for(dim)?;
        if !(config.c_safe > 0.0 && config.c_safe < 1.0) || config.cadence == 0 {
            return Err(Error::Precondition("c_safe must lie in (0, 1) and cadence be at least 1".into()));
        }
        if !(config.stop_fraction >= 0.0 && config.stop_fraction < 1.0) {
            return Err(Error::Precondition(format!(
                "stop fraction {} must lie in [0, 1)",
                config.stop_fraction
            )));
        }
        if let Some(dt) = config.fixed_dt {
            if !(dt > 0.0) {
                return Err(Error::Precondition(format!("fixed dt {dt} must be positive")));
            }
        }
        let grid = Arc::new(SphereGrid::new(dim, config.degree)?);
        let eval_grid = if config.dealias {
            Arc::new(SphereGrid::new(dim, 2 * config.degree)?)
        } else {
            grid.clone()
        };
        Ok(Self {
            c_f: config.speed.normalization(dim),
            delta0: config.speed.delta0(dim),
            config,
            grid,
            eval_grid,
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn eval_grid(&self) -> &Arc<SphereGrid> {
        &self.eval_grid
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    /// Re-express `body` at the state degree (zero-padded or truncated).
    pub fn project(&self, body: &SupportFunction) -> Result<SupportFunction> {
        if body.dim() != self.grid.dim() {
            return Err(Error::Dimension {
                expected: self.grid.dim(),
                found: body.dim(),
            });
        }
        let mut c = body.coefficients().to_vec();
        c.resize(self.grid.coefficient_count(), 0.0);
        SupportFunction::from_coefficients(&c, self.grid.clone())
    }

    fn evaluate(&self, coeffs: &[f64]) -> Result<Evaluated> {
        let body = SupportFunction::from_coefficients(coeffs, self.eval_grid.clone())?;
        let curv = curvature(&body)?;
        let speed = evaluate(&self.config.speed, &curv);
        Ok(Evaluated { curv, speed, body })
    }

    /// `−F` projected to the state degree.
    fn rhs(&self, ev: &Evaluated) -> Vec<f64> {
        let mut c = analyze_values(&ev.speed.value, &self.eval_grid);
        c.truncate(self.grid.coefficient_count());
        for x in &mut c {
            *x = -*x;
        }
        c
    }

    /// `c_safe h² / max(trace Ḟ · max(1, r_max²) / r_min²)`.
    fn stable_dt(&self, ev: &Evaluated) -> f64 {
        let n = self.grid.dim();
        let h = self.grid.min_spacing();
        let stiff = (0..ev.curv.len())
            .map(|i| {
                let r = ev.curv.radii(i);
                let (lo, hi) = (r[0], r[n - 1]);
                ev.speed.dot_trace[i] * hi.powi(2).max(1.0) / (lo * lo)
            })
            .fold(0.0, f64::max);
        self.config.c_safe * h * h / stiff
    }

    fn rk4(&self, c: &[f64], k1: &[f64], dt: f64) -> Result<(Vec<f64>, Evaluated)> {
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { c.iter().zip(k).map(|(x, y)| x + a * y).collect() };
        let k2 = self.rhs(&self.evaluate(&axpy(0.5 * dt, k1))?);
        let k3 = self.rhs(&self.evaluate(&axpy(0.5 * dt, &k2))?);
        let k4 = self.rhs(&self.evaluate(&axpy(dt, &k3))?);
        let next: Vec<f64> = (0..c.len())
            .map(|i| c[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let ev = self.evaluate(&next)?;
        Ok((next, ev))
    }

    /// One step from an evaluated state; halves `dt` while convexity is lost.
    fn advance(&self, c: &[f64], ev: &Evaluated, dt: f64) -> Result<(Vec<f64>, Evaluated, f64)> {
        let k1 = self.rhs(ev);
        let mut dt = dt;
        for _ in 0..=MAX_HALVINGS {
            match self.rk4(c, &k1, dt) {
                Ok((next, ev)) => return Ok((next, ev, dt)),
                Err(Error::ConvexityLost { .. }) | Err(Error::NonPositiveMeanCurvature { .. }) => dt *= 0.5,
                Err(e) => return Err(e),
            }
        }
        Err(Error::ConvexityLost {
            node: 0,
            eigenvalue: f64::NAN,
            direction: [f64::NAN; 3],
        })
    }

    fn step_size(&self, ev: &Evaluated) -> f64 {
        self.config.fixed_dt.unwrap_or_else(|| self.stable_dt(ev))
    }

    /// One explicit RK4 step; returns the new state and the step taken.
    pub fn step(&self, body: &SupportFunction) -> Result<(SupportFunction, f64)> {
        let c = self.project(body)?.coefficients().to_vec();
        let ev = self.evaluate(&c)?;
        let (next, _, dt) = self.advance(&c, &ev, self.step_size(&ev))?;
        Ok((SupportFunction::from_coefficients(&next, self.grid.clone())?, dt))
    }

    fn snapshot(&self, step: usize, t: f64, dt: f64, c: &[f64], ev: &Evaluated) -> Result<FlowSnapshot> {
        let body = SupportFunction::from_coefficients(c, self.grid.clone())?;
        let n = self.grid.dim();
        let flux: Vec<f64> = ev.speed.value.iter().zip(&ev.curv.det_r).map(|(f, d)| f * d).collect();
        Ok(FlowSnapshot {
            step,
            t,
            dt,
            summary: CurvatureSummary::new(&ev.curv, &ev.speed),
            radii: direct_radii_lp(&body)?,
            volumes: mixed_volumes(&ev.body, &ev.curv),
            volume_rate: -((n + 1) as f64) * self.eval_grid.mean(&flux),
            body,
        })
    }

    /// Run from `initial` until a stop condition; snapshots every `cadence` steps.
    pub fn run(&self, initial: &SupportFunction) -> Result<Trajectory> {
        let mut c = self.project(initial)?.coefficients().to_vec();
        let mut ev = self.evaluate(&c)?;
        let mut t = 0.0;
        let mut snapshots = vec![self.snapshot(0, t, 0.0, &c, &ev)?];
        let r0 = snapshots[0].radii.r_minus;
        let threshold = self.config.stop_fraction * r0;
        let mut steps = 0;
        let mut status = None;
        let outside = |ev: &Evaluated, t: f64| -> Result<Option<RunStatus>> {
            let p = pinching_status(&ev.curv, self.delta0)?;
            Ok((!p.inside).then_some(RunStatus::ConeExit {
                t,
                node: p.worst_node,
                ratio: p.max_ratio,
            }))
        };
        if let Some(s) = outside(&ev, t)? {
            status = Some(s);
        }
        while status.is_none() {
            if steps >= self.config.max_steps {
                status = Some(RunStatus::Budget);
                break;
            }
            let mut dt = self.step_size(&ev);
            let mut last = false;
            if let Some(end) = self.config.end_time {
                if t + dt >= end * (1.0 - 1e-12) {
                    dt = end - t;
                    last = true;
                }
            }
            let (next, next_ev, taken) = match self.advance(&c, &ev, dt) {
                Ok(x) => x,
                Err(Error::ConvexityLost { .. }) => {
                    status = Some(RunStatus::StepFailure {
                        t,
                        message: format!("convexity lost after {MAX_HALVINGS} halvings"),
                    });
                    break;
                }
                Err(e) => return Err(e),
            };
            if taken < dt {
                last = false;
            }
            c = next;
            ev = next_ev;
            t += taken;
            steps += 1;
            let cone = outside(&ev, t)?;
            let due = steps % self.config.cadence == 0 || last || cone.is_some();
            if due {
                let snap = self.snapshot(steps, t, taken, &c, &ev)?;
                let below = snap.radii.r_minus < threshold;
                snapshots.push(snap);
                if cone.is_some() {
                    status = cone;
                } else if below {
                    status = Some(RunStatus::Threshold);
                } else if last {
                    status = Some(RunStatus::EndTime);
                }
            }
        }
        let status = status.expect("loop exits with a status");
        if snapshots.last().map(|s| s.step) != Some(steps) {
            snapshots.push(self.snapshot(steps, t, 0.0, &c, &ev)?);
        }
        self.assemble(snapshots, status, steps)
    }

    /// Snapshot of a stored state, as `run` would have recorded it.
    pub fn observe(&self, step: usize, t: f64, dt: f64, body: &SupportFunction) -> Result<FlowSnapshot> {
        let c = self.project(body)?.coefficients().to_vec();
        let ev = self.evaluate(&c)?;
        self.snapshot(step, t, dt, &c, &ev)
    }

    /// Trajectory from recorded snapshots; the estimates are recomputed.
    pub fn assemble(&self, snapshots: Vec<FlowSnapshot>, status: RunStatus, steps: usize) -> Result<Trajectory> {
        if snapshots.is_empty() {
            return Err(Error::Insufficient("a trajectory needs at least one snapshot".into()));
        }
        let alpha = self.config.speed.alpha();
        let t_hat = fit_extinction(&snapshots, alpha, self.c_f);
        let p_hat = direct_radii(&snapshots.last().unwrap().body)?.incenter;
        Ok(Trajectory {
            dim: self.grid.dim(),
            speed: self.config.speed.clone(),
            alpha,
            c_f: self.c_f,
            snapshots,
            status,
            steps,
            t_hat,
            p_hat,
        })
    }
}

/// Mean of `t_i + r_i^{1+α}/((1+α)c_f)` over the final 20% of snapshots.
pub fn fit_extinction(snapshots: &[FlowSnapshot], alpha: f64, c_f: f64) -> f64 {
    let take = (snapshots.len() / 5).max(1);
    let tail = &snapshots[snapshots.len() - take..];
    tail.iter()
        .map(|s| s.t + sphere_lifetime(s.radii.r_minus, alpha, c_f))
        .sum::<f64>()
        / take as f64
}

#[derive(Debug, Clone)]
pub struct Rescaled {
    pub t: f64,
    pub radius: f64,
    /// `(s − ⟨p̂, u⟩)/R` at the state degree.
    pub body: SupportFunction,
    /// `max |s̃ − 1|` sampled on the doubled grid.
    pub max_deviation: f64,
}

/// Rescale snapshot `index` about `p̂` by the self-similar radius.
pub fn rescale(traj: &Trajectory, index: usize) -> Result<Rescaled> {
    let snap = traj
        .snapshots
        .get(index)
        .ok_or_else(|| Error::Range(format!("snapshot {index} out of {}", traj.snapshots.len())))?;
    let radius = traj.sphere_radius(snap.t)?;
    let body = snap.body.translated(&traj.p_hat.map(|x| -x)).scaled(1.0 / radius);
    let fine = Arc::new(SphereGrid::new(body.dim(), 2 * body.grid().degree())?);
    let sampled = SupportFunction::from_coefficients(body.coefficients(), fine)?;
    let max_deviation = sampled.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    Ok(Rescaled {
        t: snap.t,
        radius,
        body,
        max_deviation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitPointReport {
    /// `(t, |p_t − p̂|/R(t))` per snapshot before `T̂`.
    pub rows: Vec<(f64, f64)>,
    /// Maximum over the second half of the rows.
    pub late_max: f64,
}

/// Drift of the incenter relative to the self-similar radius.
pub fn limit_point_error(traj: &Trajectory) -> Result<LimitPointReport> {
    let mut rows = Vec::new();
    for snap in &traj.snapshots {
        let Ok(radius) = traj.sphere_radius(snap.t) else { continue };
        let p = direct_radii(&snap.body)?.incenter;
        let d = (0..3).map(|i| (p[i] - traj.p_hat[i]).powi(2)).sum::<f64>().sqrt();
        rows.push((snap.t, d / radius));
    }
    if rows.is_empty() {
        return Err(Error::Insufficient("no snapshot precedes the extinction estimate".into()));
    }
    let late_max = rows[rows.len() / 2..].iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(LimitPointReport { rows, late_max })
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow {
    pub t: f64,
    pub inscribed: f64,
    pub remaining: f64,
    pub circumscribed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    pub slack: f64,
    pub passed: bool,
}

/// `T̂ − t` against the lifetimes of the inscribed and circumscribed spheres.
pub fn sandwich_check(traj: &Trajectory, slack: f64) -> SandwichReport {
    let rows: Vec<SandwichRow> = traj
        .snapshots
        .iter()
        .map(|s| SandwichRow {
            t: s.t,
            inscribed: traj.sphere_lifetime(s.radii.r_minus),
            remaining: traj.t_hat - s.t,
            circumscribed: traj.sphere_lifetime(s.radii.r_plus),
        })
        .collect();
    let passed = rows
        .iter()
        .all(|r| r.remaining >= r.inscribed * (1.0 - slack) && r.remaining <= r.circumscribed * (1.0 + slack));
    SandwichReport { rows, slack, passed }
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeDecayRow {
    pub t: f64,
    pub difference: f64,
    pub quadrature: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeDecayReport {
    pub rows: Vec<VolumeDecayRow>,
    pub max_relative: f64,
}

/// Central difference of `V_{n+1}` across snapshots against the quadrature rate.
pub fn volume_decay_check(traj: &Trajectory) -> Result<VolumeDecayReport> {
    let s = &traj.snapshots;
    let n = traj.dim;
    let mut rows = Vec::new();
    for w in s.windows(3) {
        let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
        if !(h1 > 0.0 && h2 > 0.0) {
            continue;
        }
        let v = |i: usize| w[i].volumes.v[n + 1];
        let d = -h2 / (h1 * (h1 + h2)) * v(0) + (h2 - h1) / (h1 * h2) * v(1) + h1 / (h2 * (h1 + h2)) * v(2);
        let q = w[1].volume_rate;
        rows.push(VolumeDecayRow {
            t: w[1].t,
            difference: d,
            quadrature: q,
            relative: (d - q).abs() / q.abs(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Insufficient("volume decay needs three snapshots".into()));
    }
    let max_relative = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
    Ok(VolumeDecayReport { rows, max_relative })
}

/// Whether `r_+` and `V_{n+1}` decrease strictly from snapshot to snapshot.
pub fn containment_monotone(traj: &Trajectory) -> (bool, bool) {
    let n = traj.dim;
    let s = &traj.snapshots;
    let r = s.windows(2).all(|w| w[1].radii.r_plus < w[0].radii.r_plus);
    let v = s.windows(2).all(|w| w[1].volumes.v[n + 1] < w[0].volumes.v[n + 1]);
    (r, v)
}

/// Diskant bounds along the trajectory, for reporting.
pub fn diskant_series(traj: &Trajectory) -> Result<Vec<(f64, f64, f64)>> {
    traj.snapshots
        .iter()
        .map(|s| diskant_bounds(&s.volumes).map(|d| (s.t, d.lower, d.upper)))
        .collect()
}
