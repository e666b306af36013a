//! Evolution equations of the speed and curvature along a curve flow,
//! checked against the simulated trajectory.

use std::sync::Arc;

use serde::Serialize;

use crate::body::{curvature, SupportFunction};
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::spectral::{tangential_derivatives, SpectralField, SphereGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Quantity {
    Speed,
    Curvature,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub quantity: Quantity,
    /// `(t, max_node |D_t G − right side|)` at interior snapshots.
    pub rows: Vec<(f64, f64)>,
    pub max_residual: f64,
    /// Largest `|right side|`, for scale.
    pub max_rhs: f64,
    pub inconclusive: bool,
}

/// Largest relative change of `G` between consecutive snapshots allowed
/// before central differencing is considered unresolved.
pub const MAX_STEP_CHANGE: f64 = 0.05;

impl ResidualReport {
    /// Largest residual over snapshots with `from ≤ t ≤ to`, so runs with
    /// different cadences are compared on a common time window.
    pub fn max_between(&self, from: f64, to: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.0 >= from && r.0 <= to)
            .map(|r| r.1)
            .fold(0.0, f64::max)
    }
}

struct Sample {
    t: f64,
    g: Vec<f64>,
    rhs: Vec<f64>,
    drift: Vec<f64>,
}

/// Residual of `D_t G = Ḟ ∂²_s G + (reaction terms)` for `G = F` or `G = κ`,
/// where `D_t G = ∂_t|_u G + ⟨∇̄F, ∇_M G⟩` is the time derivative following
/// normal trajectories.
pub fn curve_evolution_residual(traj: &Trajectory, quantity: Quantity) -> Result<ResidualReport> {
    if traj.dim != 1 {
        return Err(Error::Precondition("the evolution residual is implemented for curves".into()));
    }
    if traj.snapshots.len() < 3 {
        return Err(Error::Insufficient("the evolution residual needs three snapshots".into()));
    }
    let degree = traj.last().body.grid().degree();
    let grid = Arc::new(SphereGrid::circle(4 * degree));
    let spec = &traj.speed;
    let alpha = traj.alpha;
    let mut samples = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let body = SupportFunction::from_coefficients(snap.body.coefficients(), grid.clone())?;
        let curv = curvature(&body)?;
        let len = grid.len();
        let rho: Vec<f64> = (0..len).map(|i| curv.radii(i)[0]).collect();
        let kappa: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
        let f: Vec<f64> = kappa.iter().map(|k| spec.value(&[*k])).collect();
        let fd: Vec<f64> = kappa.iter().map(|k| spec.gradient(&[*k])[0]).collect();
        let fdd: Vec<f64> = kappa.iter().map(|k| spec.hessian(&[*k])[0][0]).collect();
        let g = match quantity {
            Quantity::Speed => f.clone(),
            Quantity::Curvature => kappa.clone(),
        };
        let dg = tangential_derivatives(&SpectralField::analyze(&g, &grid)?, &grid)?;
        let df = tangential_derivatives(&SpectralField::analyze(&f, &grid)?, &grid)?;
        let dk = tangential_derivatives(&SpectralField::analyze(&kappa, &grid)?, &grid)?;
        let mut rhs = Vec::with_capacity(len);
        let mut drift = Vec::with_capacity(len);
        for i in 0..len {
            let r = rho[i];
            // ∂_θ ρ = −ρ² ∂_θ κ
            let rt = -r * r * dk.gradient[i][0];
            let gt = dg.gradient[i][0];
            let gtt = dg.hessian[i][0];
            let lap = gtt / (r * r) - gt * rt / (r * r * r);
            let k2 = kappa[i] * kappa[i];
            let reaction = match quantity {
                Quantity::Speed => fd[i] * k2 * f[i],
                Quantity::Curvature => {
                    let k_arc = dk.gradient[i][0] / r;
                    fdd[i] * k_arc * k_arc + fd[i] * k2 * kappa[i] + (1.0 - alpha) * f[i] * k2
                }
            };
            rhs.push(fd[i] * lap + reaction);
            drift.push(df.gradient[i][0] * gt / r);
        }
        samples.push(Sample {
            t: snap.t,
            g,
            rhs,
            drift,
        });
    }
    let mut rows = Vec::new();
    let mut max_rhs = 0.0f64;
    let mut inconclusive = false;
    for w in samples.windows(3) {
        let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(Error::Precondition("snapshot times must increase".into()));
        }
        let scale = w[1].g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            let (a, b, c) = (w[0].g[i], w[1].g[i], w[2].g[i]);
            if (c - a).abs() > MAX_STEP_CHANGE * scale {
                inconclusive = true;
            }
            let dt = -h2 / (h1 * (h1 + h2)) * a + (h2 - h1) / (h1 * h2) * b + h1 / (h2 * (h1 + h2)) * c;
            let material = dt + w[1].drift[i];
            worst = worst.max((material - w[1].rhs[i]).abs());
            max_rhs = max_rhs.max(w[1].rhs[i].abs());
        }
        rows.push((w[1].t, worst));
    }
    let max_residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(ResidualReport {
        quantity,
        rows,
        max_residual,
        max_rhs,
        inconclusive,
    })
}

/// Observed convergence orders between successive refinement levels, from
/// `(step, residual)` pairs ordered coarse to fine.
pub fn observed_orders(levels: &[(f64, f64)]) -> Vec<f64> {
    levels
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{Flow, FlowConfig};
    use crate::speeds::SpeedSpec;

    fn curve_run(axes: [f64; 2], degree: usize, dt: f64, end: f64, cadence: usize) -> Trajectory {
        let mut cfg = FlowConfig::new(SpeedSpec::parse("pow_mean,alpha=2").unwrap(), degree);
        cfg.fixed_dt = Some(dt);
        cfg.end_time = Some(end);
        cfg.cadence = cadence;
        let flow = Flow::new(cfg, 1).unwrap();
        let s0 = SupportFunction::ellipsoid(flow.grid().clone(), &axes).unwrap();
        flow.run(&s0).unwrap()
    }

    #[test]
    fn circle_residual_is_tiny() {
        let traj = curve_run([1.0, 1.0], 8, 1e-5, 4e-5, 1);
        for q in [Quantity::Speed, Quantity::Curvature] {
            let r = curve_evolution_residual(&traj, q).unwrap();
            assert!(!r.inconclusive);
            assert!(r.max_residual <= 1e-8 * r.max_rhs, "{r:?}");
        }
    }

    #[test]
    fn ellipse_residual_converges_at_second_order() {
        let mut levels = Vec::new();
        for (dt, l) in [(1e-3, 16), (5e-4, 24), (2.5e-4, 32)] {
            let traj = curve_run([1.2, 1.0], l, dt, 0.01, 1);
            let r = curve_evolution_residual(&traj, Quantity::Speed).unwrap();
            assert!(!r.inconclusive);
            levels.push((dt, r.max_between(0.002, 0.008)));
        }
        for p in observed_orders(&levels) {
            assert!(p >= 1.8, "{levels:?}");
        }
    }

    #[test]
    fn coarse_cadence_is_inconclusive() {
        let traj = curve_run([1.5, 1.0], 16, 1e-3, 0.2, 50);
        let r = curve_evolution_residual(&traj, Quantity::Curvature).unwrap();
        assert!(r.inconclusive);
    }
}
