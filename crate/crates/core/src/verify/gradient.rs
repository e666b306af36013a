//! Pointwise gradient inequalities for the second fundamental form of a
//! surface, evaluated in the Gauss chart.
//!
//! Identifying `T_X M` with `T_u S²`, the metric of `M` is the Euclidean one,
//! `A = R⁻¹` and `∇^M_w = ∇̄_{R⁻¹w}`, so `∇_e A = −R⁻¹ (∇̄_{R⁻¹e} R) R⁻¹`
//! with `∇̄R` the third covariant derivative of `s` plus `ds ⊗ ḡ`.

use serde::Serialize;

use crate::body::SupportFunction;
use crate::error::{Error, Result};
use crate::spectral::partials;

/// Relative Codazzi asymmetry above which the grid is deemed too coarse.
pub const CODAZZI_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    /// `min ‖∇A‖² − (3/(n+2))‖∇H‖²`.
    pub norm_margin: f64,
    /// `min ‖∇Å‖² − (2(n−1)/(3n))‖∇A‖²`.
    pub traceless_margin: f64,
    pub max_grad_a2: f64,
    /// Measured discretisation scale, from the asymmetry of `∇A`.
    pub tol_disc: f64,
    /// Largest asymmetry of `∇A` relative to its largest size.
    pub codazzi_defect: f64,
    pub inconclusive: bool,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        !self.inconclusive && self.norm_margin >= -self.tol_disc && self.traceless_margin >= -self.tol_disc
    }
}

type M2 = [[f64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn inverse(a: &M2) -> M2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// `∇A` as `t[i][j][k] = (∇_{e_i} A)(e_j, e_k)` at every grid node.
pub fn grad_second_form(body: &SupportFunction) -> Result<Vec<[M2; 2]>> {
    if body.dim() != 2 {
        return Err(Error::Precondition("gradient inequalities are implemented for surfaces".into()));
    }
    let grid = body.grid();
    let d = partials(body.field(), grid, 3)?;
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (th, _) = grid.angles(i);
        let (sn, cs) = (th.sin(), th.cos());
        let cot = cs / sn;
        let (s, st, sp) = (d.s[i], d.t[i], d.p[i]);
        let (stt, stp, spp) = (d.tt[i], d.tp[i], d.pp[i]);
        let (sttt, sttp, stpp, sppp) = (d.ttt[i], d.ttp[i], d.tpp[i], d.ppp[i]);
        // Coordinate components of R = ∇̄²s + s ḡ.
        let r_tt = stt + s;
        let r_tp = stp - cot * sp;
        let r_pp = spp + sn * cs * st + s * sn * sn;
        // ∂_k R_ij.
        let dt_tt = sttt + st;
        let dp_tt = sttp + sp;
        let dt_tp = sttp + sp / (sn * sn) - cot * stp;
        let dp_tp = stpp - cot * spp;
        let dt_pp = stpp + (cs * cs - sn * sn) * st + sn * cs * stt + st * sn * sn + 2.0 * s * sn * cs;
        let dp_pp = sppp + sn * cs * stp + sp * sn * sn;
        // Covariant ∇̄_k R_ij.
        let c_ttt = dt_tt;
        let c_ttp = dt_tp - cot * r_tp;
        let c_tpp = dt_pp - 2.0 * cot * r_pp;
        let c_ptt = dp_tt - 2.0 * cot * r_tp;
        let c_ptp = dp_tp - cot * r_pp + sn * cs * r_tt;
        let c_ppp = dp_pp + 2.0 * sn * cs * r_tp;
        // Orthonormal frame (e_θ, ∂_φ / sin θ).
        let w = [1.0, 1.0 / sn];
        let r: M2 = [[r_tt, r_tp * w[1]], [r_tp * w[1], r_pp * w[1] * w[1]]];
        let grad_r: [M2; 2] = [
            [[c_ttt, c_ttp * w[1]], [c_ttp * w[1], c_tpp * w[1] * w[1]]],
            [[c_ptt * w[1], c_ptp * w[1] * w[1]], [c_ptp * w[1] * w[1], c_ppp * w[1].powi(3)]],
        ];
        let a = inverse(&r);
        let mut t = [[[0.0; 2]; 2]; 2];
        for (e, te) in t.iter_mut().enumerate() {
            let mut dir = [[0.0; 2]; 2];
            for (m, gm) in grad_r.iter().enumerate() {
                for j in 0..2 {
                    for k in 0..2 {
                        dir[j][k] += a[m][e] * gm[j][k];
                    }
                }
            }
            let v = mul(&mul(&a, &dir), &a);
            for j in 0..2 {
                for k in 0..2 {
                    te[j][k] = -v[j][k];
                }
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// Minimum margins of the two gradient inequalities over the grid.
pub fn gradient_inequality_monitor(body: &SupportFunction) -> Result<GradientReport> {
    let n = 2.0;
    let grads = grad_second_form(body)?;
    let mut report = GradientReport {
        norm_margin: f64::INFINITY,
        traceless_margin: f64::INFINITY,
        max_grad_a2: 0.0,
        tol_disc: 0.0,
        codazzi_defect: 0.0,
        inconclusive: false,
    };
    let mut asym_scale = 0.0f64;
    let mut max_asym = 0.0f64;
    for t in &grads {
        let mut a2 = 0.0;
        let mut asym = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    a2 += t[i][j][k] * t[i][j][k];
                    asym += (t[i][j][k] - t[j][i][k]).powi(2);
                }
            }
        }
        let gh: Vec<f64> = (0..2).map(|i| t[i][0][0] + t[i][1][1]).collect();
        let h2: f64 = gh.iter().map(|x| x * x).sum();
        let traceless2 = a2 - h2 / n;
        report.norm_margin = report.norm_margin.min(a2 - 3.0 / (n + 2.0) * h2);
        report.traceless_margin = report.traceless_margin.min(traceless2 - 2.0 * (n - 1.0) / (3.0 * n) * a2);
        report.max_grad_a2 = report.max_grad_a2.max(a2);
        asym_scale = asym_scale.max(4.0 * (a2 * asym).sqrt());
        max_asym = max_asym.max(asym);
    }
    // Gradients below rounding level of the curvature count as zero.
    let kappa = 1.0 / body.grid().mean(body.values());
    let floor = (1e-10 * kappa * kappa).powi(2);
    report.codazzi_defect = (max_asym / report.max_grad_a2.max(floor)).sqrt();
    report.tol_disc = asym_scale + 1e-12 * report.max_grad_a2;
    report.inconclusive = report.codazzi_defect > CODAZZI_LIMIT;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SphereGrid;
    use std::sync::Arc;

    #[test]
    fn sphere_gradients_vanish() {
        let grid = Arc::new(SphereGrid::sphere(8));
        let r = gradient_inequality_monitor(&SupportFunction::sphere(grid, 2.0).unwrap()).unwrap();
        assert!(r.max_grad_a2 < 1e-20);
        assert!(r.passed());
    }

    #[test]
    fn ellipsoid_margins_hold_and_refine() {
        let coarse = Arc::new(SphereGrid::sphere(16));
        let fine = Arc::new(SphereGrid::sphere(32));
        let a = gradient_inequality_monitor(&SupportFunction::ellipsoid(coarse, &[1.0, 1.0, 1.2]).unwrap()).unwrap();
        let b = gradient_inequality_monitor(&SupportFunction::ellipsoid(fine, &[1.0, 1.0, 1.2]).unwrap()).unwrap();
        assert!(b.passed(), "{b:?}");
        let floor = -1e-6 * b.max_grad_a2;
        assert!(b.norm_margin >= floor && b.traceless_margin >= floor, "{b:?}");
        assert!(b.codazzi_defect <= a.codazzi_defect.max(1e-9));
    }

    #[test]
    fn curves_are_rejected() {
        let grid = Arc::new(SphereGrid::circle(8));
        let body = SupportFunction::sphere(grid, 1.0).unwrap();
        assert!(gradient_inequality_monitor(&body).is_err());
    }

    #[test]
    fn grad_a_matches_finite_differences_along_meridian() {
        // For an ellipsoid of revolution the θθθ component is the θ-derivative
        // of the meridian curvature divided by the meridian radius.
        let grid = Arc::new(SphereGrid::sphere(24));
        let (a, c) = (1.0f64, 1.3f64);
        let body = SupportFunction::ellipsoid(grid.clone(), &[a, a, c]).unwrap();
        let t = grad_second_form(&body).unwrap();
        let rho = |th: f64| {
            let (s, k) = (th.sin(), th.cos());
            (a * a * c * c) / (a * a * s * s + c * c * k * k).powf(1.5)
        };
        for i in (0..grid.len()).step_by(37) {
            let (th, _) = grid.angles(i);
            let h = 1e-5;
            let dk = (1.0 / rho(th + h) - 1.0 / rho(th - h)) / (2.0 * h);
            let expect = dk / rho(th);
            assert!((t[i][0][0][0] - expect).abs() < 1e-7 * (1.0 + expect.abs()), "{} vs {expect}", t[i][0][0][0]);
        }
    }
}
