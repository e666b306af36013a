//! Mixed cross-sectional volumes, radius bounds, inradius and circumradius.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::Serialize;

use crate::body::{sym2_eigen, tangent_basis, CurvatureField, SupportFunction};
use crate::error::{Error, Result};
use crate::spectral::{PointEvaluator, Vec3};
use crate::symmetric::{binomial, elementary};

#[derive(Debug, Clone, Serialize)]
pub struct MixedVolumes {
    pub n: usize,
    /// Canonical `V_0, …, V_{n+1}`.
    pub v: Vec<f64>,
    /// `(1/|Sⁿ|)∫ E_{n−k} dμ` for `0 ≤ k ≤ n`.
    pub curvature_form: Vec<Option<f64>>,
    /// `(1/|Sⁿ|)∫ s E_{n+1−k} dμ` for `1 ≤ k ≤ n+1`.
    pub support_form: Vec<Option<f64>>,
}

impl MixedVolumes {
    /// `V_1^{n+1} / V_{n+1}`.
    pub fn iso_ratio(&self) -> f64 {
        self.v[1].powi(self.n as i32 + 1) / self.v[self.n + 1]
    }

    /// Largest relative disagreement between the two formulas.
    pub fn formula_gap(&self) -> f64 {
        (1..=self.n)
            .map(|k| {
                let (a, b) = (self.curvature_form[k].unwrap(), self.support_form[k].unwrap());
                (a - b).abs() / a.abs().max(b.abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Both integral forms via `E_j(κ) det R = σ_{n−j}(r)/binom(n, j)`.
pub fn mixed_volumes(body: &SupportFunction, curv: &CurvatureField) -> MixedVolumes {
    let n = body.dim();
    let grid = body.grid();
    let len = grid.len();
    let mut a_int = vec![vec![0.0; len]; n + 1];
    let mut b_int = vec![vec![0.0; len]; n + 2];
    for i in 0..len {
        let sigma = elementary(curv.radii(i));
        let s = body.values()[i];
        for k in 0..=n {
            a_int[k][i] = sigma[k] / binomial(n, k);
        }
        for k in 1..=n + 1 {
            b_int[k][i] = s * sigma[k - 1] / binomial(n, k - 1);
        }
    }
    let mut curvature_form = vec![None; n + 2];
    let mut support_form = vec![None; n + 2];
    for k in 0..=n {
        curvature_form[k] = Some(grid.mean(&a_int[k]));
    }
    for k in 1..=n + 1 {
        support_form[k] = Some(grid.mean(&b_int[k]));
    }
    let v = (0..=n + 1)
        .map(|k| match (curvature_form[k], support_form[k]) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => unreachable!(),
        })
        .collect();
    MixedVolumes {
        n,
        v,
        curvature_form,
        support_form,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskantBounds {
    /// Lower bound for the inradius.
    pub lower: f64,
    /// Upper bound for the circumradius.
    pub upper: f64,
    /// A negative radicand was clamped to zero.
    pub clamped: bool,
}

/// Diskant estimates from `V_1`, `V_n`, `V_{n+1}`.
pub fn diskant_bounds(mv: &MixedVolumes) -> Result<DiskantBounds> {
    let n = mv.n;
    let vol = mv.v[n + 1];
    if !(vol > 0.0) {
        return Err(Error::Precondition(format!("V_{} = {vol} must be positive", n + 1)));
    }
    let lambda = vol.powf(1.0 / (n as f64 + 1.0));
    let v1 = mv.v[1] / lambda;
    let vn = mv.v[n] / lambda.powi(n as i32);
    let nf = n as f64;
    let mut clamped = false;
    let mut root = |x: f64| {
        let r = x.powf((nf + 1.0) / nf) - 1.0;
        if r < 0.0 {
            clamped = true;
            0.0
        } else {
            r.powf(1.0 / (nf + 1.0))
        }
    };
    let lower = vn.powf(1.0 / nf) - root(vn);
    let upper = 1.0 / (v1.powf(1.0 / nf) - root(v1));
    Ok(DiskantBounds {
        lower: lower * lambda,
        upper: upper * lambda,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusReport {
    pub r_minus: f64,
    pub r_plus: f64,
    pub incenter: Vec3,
    pub circumcenter: Vec3,
}

impl RadiusReport {
    pub fn ratio(&self) -> f64 {
        self.r_plus / self.r_minus
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Ball {
    Inscribed,
    Circumscribed,
}

fn solve_lp(dim: usize, dirs: &[(Vec3, f64)], ball: Ball) -> Result<(Vec3, f64)> {
    let direction = match ball {
        Ball::Inscribed => OptimizationDirection::Maximize,
        Ball::Circumscribed => OptimizationDirection::Minimize,
    };
    let mut lp = Problem::new(direction);
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let c: Vec<_> = (0..=dim).map(|_| lp.add_var(0.0, free)).collect();
    let t = lp.add_var(1.0, free);
    for (u, s) in dirs {
        let mut terms: Vec<_> = c.iter().zip(u).map(|(v, x)| (*v, *x)).collect();
        terms.push((t, 1.0));
        match ball {
            // ⟨c,u⟩ + t ≤ s
            Ball::Inscribed => lp.add_constraint(terms.as_slice(), ComparisonOp::Le, *s),
            // ⟨c,u⟩ + t ≥ s
            Ball::Circumscribed => lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, *s),
        }
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Solver(format!("{e} ({} constraints)", dirs.len())))?
        .into_solution()
        .map_err(|_| Error::Solver("interrupted".into()))?;
    let mut centre = [0.0; 3];
    for (k, v) in c.iter().enumerate() {
        centre[k] = sol.var_value(*v);
    }
    Ok((centre, sol.var_value(t)))
}

/// Local optimum of `g(u) = s(u) − ⟨c, u⟩` near `u0` by Riemannian Newton
/// iteration (minimum for inscribed, maximum for circumscribed).
fn polish(eval: &PointEvaluator, dim: usize, c: &Vec3, u0: &Vec3, ball: Ball) -> (Vec3, f64) {
    let sign = if ball == Ball::Inscribed { 1.0 } else { -1.0 };
    let mut u = *u0;
    for _ in 0..30 {
        let d = eval.derivatives(&u);
        let cu = dot(c, &u);
        let (e1, e2) = tangent_basis(&u, dim);
        let basis: Vec<Vec3> = if dim == 1 { vec![e1] } else { vec![e1, e2] };
        // tangential gradient and Hessian of sign·g
        let g: Vec<f64> = basis.iter().map(|e| sign * (dot(&d.gradient, e) - dot(c, e))).collect();
        let hform = |a: &Vec3, b: &Vec3| -> f64 {
            let hb = [0, 1, 2].map(|i| (0..3).map(|j| d.hessian[i][j] * b[j]).sum::<f64>());
            dot(a, &hb)
        };
        let mut h = vec![vec![0.0; basis.len()]; basis.len()];
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                h[i][j] = sign * (hform(a, b) + if i == j { cu } else { 0.0 });
            }
        }
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm <= 1e-15 * (1.0 + d.value.abs()) {
            break;
        }
        // Newton along well-curved eigendirections; flat or concave ones
        // (rings of contacts, near-balls) take long capped steps downhill
        let step: Vec<f64> = if dim == 1 {
            let floor = 1e-12 * h[0][0].abs() + 1e-300;
            vec![-g[0] / h[0][0].max(floor)]
        } else {
            let (a, b, c) = (h[0][0], h[0][1], h[1][1]);
            let eig = sym2_eigen(a, b, c);
            let floor = 1e-12 * eig[0].abs().max(eig[1].abs()) + 1e-300;
            if (a - c).abs() + b.abs() <= 1e-12 * (a.abs() + c.abs()) {
                // isotropic Hessian
                let lambda = eig[0].max(floor);
                vec![-g[0] / lambda, -g[1] / lambda]
            } else {
                let mut step = vec![0.0, 0.0];
                for lambda in eig {
                    // eigenvector of [[a, b], [b, c]]
                    let v = if (a - lambda).abs() > (c - lambda).abs() { [-b, a - lambda] } else { [c - lambda, -b] };
                    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
                    let v = [v[0] / norm, v[1] / norm];
                    // capped per direction so a flat direction cannot
                    // swamp the Newton component of a curved one
                    let amount = (-(v[0] * g[0] + v[1] * g[1]) / lambda.max(floor)).clamp(-0.2, 0.2);
                    step[0] += amount * v[0];
                    step[1] += amount * v[1];
                }
                step
            }
        };
        let size = step.iter().map(|x| x * x).sum::<f64>().sqrt();
        // further steps cannot change the value in floating point
        let gain: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>().abs();
        if size < 1e-14 || gain <= 2e-16 * (1.0 + d.value.abs()) {
            break;
        }
        let objective = |v: &Vec3| sign * (eval.value(v) - dot(c, v));
        let current = sign * (d.value - cu);
        let slack = 1e-15 * (1.0 + current.abs());
        let mut scale = if size > 0.2 { 0.2 / size } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let mut next = u;
            for (e, st) in basis.iter().zip(&step) {
                for k in 0..3 {
                    next[k] += scale * st * e[k];
                }
            }
            let norm = dot(&next, &next).sqrt();
            next.iter_mut().for_each(|x| *x /= norm);
            if objective(&next) <= current + slack {
                accepted = Some(next);
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some(next) => u = next,
            None => break,
        }
    }
    (u, eval.value(&u))
}

/// Largest inscribed and smallest circumscribed balls.
///
/// Linear programs over the grid directions, refined by cutting planes at
/// locally optimal directions found from pointwise derivatives, so extreme
/// directions between grid nodes are honoured.
pub fn direct_radii(body: &SupportFunction) -> Result<RadiusReport> {
    let eval = body.evaluator()?;
    direct_radii_with(body, &eval)
}

pub fn direct_radii_with(body: &SupportFunction, eval: &PointEvaluator) -> Result<RadiusReport> {
    radii_impl(body, eval, true)
}

/// Radii only: same radii as [`direct_radii`] at a fraction of the cost, but
/// the centres are whatever the linear programs return, which along
/// directions that pin them only quadratically can be off by about the
/// square root of the solver tolerance.
pub fn direct_radii_lp(body: &SupportFunction) -> Result<RadiusReport> {
    radii_impl(body, &body.evaluator()?, false)
}

fn radii_impl(body: &SupportFunction, eval: &PointEvaluator, centred: bool) -> Result<RadiusReport> {
    let dim = body.dim();
    let base: Vec<(Vec3, f64)> = body
        .grid()
        .nodes()
        .iter()
        .copied()
        .zip(body.values().iter().copied())
        .collect();
    let (incenter, r_minus) = refine(dim, &base, eval, Ball::Inscribed, centred)?;
    let (circumcenter, r_plus) = refine(dim, &base, eval, Ball::Circumscribed, centred)?;
    Ok(RadiusReport {
        r_minus,
        r_plus,
        incenter,
        circumcenter,
    })
}

fn refine(dim: usize, base: &[(Vec3, f64)], eval: &PointEvaluator, ball: Ball, centred: bool) -> Result<(Vec3, f64)> {
    let mut dirs = base.to_vec();
    let mut best = solve_lp(dim, &dirs, ball)?;
    for _ in 0..8 {
        let cuts = find_cuts(dim, &dirs, eval, &best, ball, 0.0);
        if cuts.is_empty() {
            break;
        }
        dirs.extend(cuts);
        best = solve_lp(dim, &dirs, ball)?;
    }
    // Report the ball at the chosen centre, which is a valid inscribed
    // (circumscribed) ball even when the relaxation has not fully converged.
    let scale = best.1.abs().max(1e-300);
    let contacts: Vec<Vec3> = ranked_polish(dim, &dirs, eval, &best, ball)
        .into_iter()
        .filter(|(slack, _, _)| *slack <= 1e-2 * scale)
        .map(|(_, u, _)| u)
        .collect();
    let f = |c: &Vec3| extreme_value(dim, &contacts, eval, c, ball);
    let sign = if ball == Ball::Inscribed { -1.0 } else { 1.0 };
    let mut result = (best.0, f(&best.0));
    if centred {
        // Only the radius is pinned to first order; the centre can drift
        // along directions where contacts constrain it quadratically.
        // Re-centre on chord midpoints of the exact extreme-value function,
        // which is exact for bodies with reflection symmetry.
        let mut centre = best.0;
        let gap = 1e-10 * scale;
        for axis in 0..=dim {
            let level = f(&centre) + gap;
            let ends = [1.0, -1.0].map(|dir| {
                let excess = |x: f64| {
                    let mut c = centre;
                    c[axis] += dir * x;
                    f(&c) - level
                };
                chord_end(excess, gap, scale)
            });
            centre[axis] += 0.5 * (ends[0] - ends[1]);
        }
        let value = f(&centre);
        if value <= result.1 + gap {
            result = (centre, value);
        }
    }
    Ok((result.0, sign * result.1))
}

/// Root of the convex increasing `excess` on `x > 0`, where `excess(0) = -gap`.
fn chord_end(excess: impl Fn(f64) -> f64, gap: f64, limit: f64) -> f64 {
    let (mut lo, mut flo) = (0.0, -gap);
    let mut hi = 1e-7 * limit;
    let mut fhi = excess(hi);
    while !(fhi > 0.0) && hi < limit {
        (lo, flo) = (hi, fhi);
        hi *= 4.0;
        fhi = excess(hi);
    }
    if !(fhi > 0.0) {
        return hi;
    }
    // Illinois regula falsi
    let mut side = 0;
    for _ in 0..60 {
        if hi - lo <= 1e-15 * limit + 1e-12 * hi {
            break;
        }
        let x = (lo * fhi - hi * flo) / (fhi - flo);
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let v = excess(x);
        if v > 0.0 {
            (hi, fhi) = (x, v);
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            (lo, flo) = (x, v);
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `max_u s(u) - <c,u>` for the circumscribed ball, `-min_u` for the inscribed
/// one, so that the optimal centre minimizes it in both cases. Local optima
/// are tracked from the warm starts `contacts`.
fn extreme_value(dim: usize, contacts: &[Vec3], eval: &PointEvaluator, c: &Vec3, ball: Ball) -> f64 {
    let sign = if ball == Ball::Inscribed { -1.0 } else { 1.0 };
    contacts
        .iter()
        .map(|u0| {
            let (u, s) = polish(eval, dim, c, u0, ball);
            sign * (s - dot(c, &u))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Polished versions of the most active directions for ball `cand`, as
/// `(slack, direction, support value)`.
fn ranked_polish(
    dim: usize,
    dirs: &[(Vec3, f64)],
    eval: &PointEvaluator,
    cand: &(Vec3, f64),
    ball: Ball,
) -> Vec<(f64, Vec3, f64)> {
    let (c, t) = cand;
    let slack = |u: &Vec3, s: f64| {
        let g = s - dot(c, u);
        if ball == Ball::Inscribed {
            g - t
        } else {
            t - g
        }
    };
    let mut ranked: Vec<(f64, Vec3)> = dirs.iter().map(|(u, s)| (slack(u, *s), *u)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    // well separated starts, so that one well is not polished repeatedly
    let spacing = (2.0 * eval.grid().min_spacing()).cos();
    let mut starts: Vec<Vec3> = Vec::new();
    for (_, u0) in &ranked {
        if starts.len() == 4 * (dim + 2) {
            break;
        }
        if starts.iter().all(|v| dot(v, u0) < spacing) {
            starts.push(*u0);
        }
    }
    let mut out: Vec<(f64, Vec3, f64)> = Vec::new();
    for u0 in &starts {
        let (u, s) = polish(eval, dim, c, u0, ball);
        if out.iter().all(|(_, v, _)| dot(v, &u) < 1.0) {
            out.push((slack(&u, s), u, s));
        }
    }
    out
}

/// Locally optimal directions that ball `cand` violates by more than `tol`.
fn find_cuts(
    dim: usize,
    dirs: &[(Vec3, f64)],
    eval: &PointEvaluator,
    cand: &(Vec3, f64),
    ball: Ball,
    tol: f64,
) -> Vec<(Vec3, f64)> {
    let floor = tol + 1e-15 * cand.1.abs().max(1.0);
    ranked_polish(dim, dirs, eval, cand, ball)
        .into_iter()
        .filter(|(slack, u, _)| *slack < -floor && dirs.iter().all(|(v, _)| dot(v, u) < 1.0))
        .map(|(_, u, s)| (u, s))
        .collect()
}

/// `max over nodes of E_k − (1+ε′) E_ℓ^{k/ℓ}`.
pub fn ek_comparison_margin(curv: &CurvatureField, k: usize, l: usize, eps: f64) -> Result<f64> {
    let n = curv.dim();
    if !(1 <= k && k < l && l <= n) {
        return Err(Error::Range(format!("need 1 <= k < l <= n, got k = {k}, l = {l}, n = {n}")));
    }
    Ok((0..curv.len())
        .map(|i| {
            let e = curv.ek(i);
            e[k] - (1.0 + eps) * e[l].powf(k as f64 / l as f64)
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct GeomboundTable {
    /// `(r_+, r_+/r_−)` per snapshot.
    pub rows: Vec<(f64, f64)>,
    /// `(ρ, Ĉ₂(ρ))`; infinite when no snapshot violates `r_+ ≤ (1+ρ) r_−`.
    pub thresholds: Vec<(f64, f64)>,
    /// Whether `Ĉ₂` is non-decreasing in `ρ` on the supplied grid.
    pub monotone: bool,
}

/// Largest circumradius below which every observed snapshot satisfies
/// `r_+ ≤ (1+ρ) r_−`.
pub fn geombound_check(radii: &[RadiusReport], rhos: &[f64]) -> GeomboundTable {
    let rows: Vec<(f64, f64)> = radii.iter().map(|r| (r.r_plus, r.ratio())).collect();
    let mut sorted = rhos.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let thresholds: Vec<(f64, f64)> = sorted
        .iter()
        .map(|&rho| {
            let c2 = rows
                .iter()
                .filter(|(_, ratio)| *ratio > 1.0 + rho)
                .map(|(rp, _)| *rp)
                .fold(f64::INFINITY, f64::min);
            (rho, c2)
        })
        .collect();
    let monotone = thresholds.windows(2).all(|w| w[1].1 >= w[0].1);
    GeomboundTable {
        rows,
        thresholds,
        monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::curvature;
    use crate::spectral::SphereGrid;
    use std::sync::Arc;
    use std::f64::consts::PI;

    fn grid(l: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::sphere(l))
    }

    #[test]
    fn balls_have_power_volumes() {
        for (l, r) in [(8, 2.0), (8, 1.0)] {
            let body = SupportFunction::sphere(grid(l), r).unwrap();
            let mv = mixed_volumes(&body, &curvature(&body).unwrap());
            for k in 0..=3 {
                assert!((mv.v[k] - r.powi(k as i32)).abs() < 1e-12 * r.powi(3));
            }
            assert!((mv.iso_ratio() - 1.0).abs() < 1e-12);
            let db = diskant_bounds(&mv).unwrap();
            assert!((db.lower - r).abs() < 1e-6 && (db.upper - r).abs() < 1e-6);
        }
    }

    #[test]
    fn ellipsoid_volume_and_formula_agreement() {
        let body = SupportFunction::ellipsoid(grid(32), &[1.0, 1.0, 1.2]).unwrap();
        let mv = mixed_volumes(&body, &curvature(&body).unwrap());
        assert!((mv.v[3] - 1.2).abs() < 1e-8);
        assert!(mv.formula_gap() < 1e-10);
        assert!(mv.iso_ratio() > 1.0);
        assert!((mv.v[0] - 1.0).abs() < 1e-12);
        assert!(mv.v[2] <= mv.v[1].powi(2) * (1.0 + 1e-9));
    }

    #[test]
    fn diskant_high_precision_oracle() {
        // values from a 30-digit evaluation of the two closed forms
        let mv = MixedVolumes {
            n: 2,
            v: vec![1.0, 1.01, 1.01, 1.0],
            curvature_form: vec![None; 4],
            support_form: vec![None; 4],
        };
        let db = diskant_bounds(&mv).unwrap();
        assert!((db.lower - 0.758_161_348_717_691_3).abs() < 1e-13);
        assert!((db.upper - 1.318_980_454_083_210_7).abs() < 1e-13);
        assert!(!db.clamped);
    }

    #[test]
    fn diskant_radicand_clamp() {
        let v1 = 1.0 - 1e-15;
        let mv = MixedVolumes {
            n: 2,
            v: vec![1.0, v1, v1 * v1, 1.0],
            curvature_form: vec![None; 4],
            support_form: vec![None; 4],
        };
        let db = diskant_bounds(&mv).unwrap();
        assert!(db.clamped);
        assert!((db.lower - 1.0).abs() < 1e-12 && (db.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diskant_profile_is_decreasing() {
        for n in 1..=4 {
            let nf = n as f64;
            let f = |x: f64| x - (x.powf(nf + 1.0) - 1.0).powf(1.0 / (nf + 1.0));
            let xs: Vec<f64> = (0..50).map(|i| 1.0 + 0.02 * i as f64).collect();
            assert!(xs.windows(2).all(|w| f(w[1]) < f(w[0])));
        }
    }

    #[test]
    fn translated_ball_radii() {
        let p = [0.1, -0.2, 0.05];
        let body = SupportFunction::sphere(grid(12), 0.8).unwrap().translated(&p);
        let r = direct_radii(&body).unwrap();
        assert!((r.r_minus - 0.8).abs() < 1e-10 && (r.r_plus - 0.8).abs() < 1e-10, "{r:?}");
        for k in 0..3 {
            assert!((r.incenter[k] - p[k]).abs() < 1e-8);
            assert!((r.circumcenter[k] - p[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn ellipsoid_radii_are_exact() {
        let body = SupportFunction::ellipsoid(grid(24), &[1.0, 1.0, 1.2]).unwrap();
        let r = direct_radii(&body).unwrap();
        assert!((r.r_minus - 1.0).abs() < 1e-8, "{}", r.r_minus);
        assert!((r.r_plus - 1.2).abs() < 1e-8, "{}", r.r_plus);
        assert!(r.incenter.iter().all(|x| x.abs() < 1e-8), "{r:?}");
        assert!(r.circumcenter.iter().all(|x| x.abs() < 1e-8));
        let body = SupportFunction::ellipsoid(grid(24), &[1.0, 1.1, 1.2]).unwrap().translated(&[0.1, 0.2, -0.3]);
        let r = direct_radii(&body).unwrap();
        assert!((r.r_minus - 1.0).abs() < 1e-8 && (r.r_plus - 1.2).abs() < 1e-8);
        for (k, p) in [0.1, 0.2, -0.3].iter().enumerate() {
            assert!((r.incenter[k] - p).abs() < 1e-8 && (r.circumcenter[k] - p).abs() < 1e-8, "{r:?}");
        }
        let ellipse = SupportFunction::ellipsoid(Arc::new(SphereGrid::circle(24)), &[1.2, 1.0]).unwrap();
        let r = direct_radii(&ellipse).unwrap();
        assert!((r.r_minus - 1.0).abs() < 1e-8 && (r.r_plus - 1.2).abs() < 1e-8);
    }

    #[test]
    fn lp_only_radii_agree() {
        let body = SupportFunction::ellipsoid(grid(24), &[1.0, 1.05, 1.1]).unwrap().add_harmonic(3, 1, 0.01).unwrap();
        let full = direct_radii(&body).unwrap();
        let lp = direct_radii_lp(&body).unwrap();
        // both are attained balls, so the centred solve can only improve
        assert!(lp.r_minus <= full.r_minus + 1e-9 && full.r_plus <= lp.r_plus + 1e-9, "{full:?} {lp:?}");
        assert!((full.r_minus - lp.r_minus).abs() < 1e-5 && (full.r_plus - lp.r_plus).abs() < 1e-5);
    }

    #[test]
    fn lp_radii_match_dense_sampling() {
        let body = SupportFunction::sphere(grid(16), 1.0).unwrap().add_harmonic(4, 0, 0.05).unwrap();
        let r = direct_radii(&body).unwrap();
        // the body is axisymmetric about a centre of symmetry at the origin,
        // so the radii are the extremes of s along one meridian
        let eval = body.evaluator().unwrap();
        let meridian: Vec<f64> = (0..=200_000)
            .map(|i| {
                let th = PI * i as f64 / 200_000.0;
                eval.value(&[th.sin(), 0.0, th.cos()])
            })
            .collect();
        let smin = meridian.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = meridian.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((r.r_minus - smin).abs() < 1e-9 && (r.r_plus - smax).abs() < 1e-9, "{r:?} {smin} {smax}");
        // a dense direction set gives an LP relaxation of both programs
        let dense = SphereGrid::sphere(160);
        let dirs: Vec<(Vec3, f64)> = dense.nodes().iter().map(|u| (*u, eval.value(u))).collect();
        let (_, rin) = solve_lp(2, &dirs, Ball::Inscribed).unwrap();
        let (_, rout) = solve_lp(2, &dirs, Ball::Circumscribed).unwrap();
        assert!(r.r_minus <= rin + 1e-9, "{} {}", r.r_minus, rin);
        assert!(r.r_plus >= rout - 1e-9);
        assert!((r.r_minus - rin).abs() < 1e-4 && (r.r_plus - rout).abs() < 1e-4);
        assert!(r.incenter.iter().chain(&r.circumcenter).all(|x| x.abs() < 1e-8), "{r:?}");
    }

    #[test]
    fn ek_margins() {
        let body = SupportFunction::sphere(grid(6), 1.3).unwrap();
        let c = curvature(&body).unwrap();
        assert!((ek_comparison_margin(&c, 1, 2, 0.1).unwrap() + 0.1 / 1.3).abs() < 1e-12);
        assert!(ek_comparison_margin(&c, 2, 1, 0.1).is_err());
        // κ = (0.5, 1.5)
        let mut single = c.clone();
        single.ek = vec![[1.0, 1.0, 0.75]];
        single.mean = vec![2.0];
        let m = ek_comparison_margin(&single, 1, 2, 0.1).unwrap();
        assert!((m - (1.0 - 1.1 * 0.75f64.sqrt())).abs() < 1e-15);
        assert!((m - 0.047_372_055).abs() < 1e-8);
        assert!(ek_comparison_margin(&single, 1, 2, 1e6).unwrap() < -1e5);
    }

    #[test]
    fn geombound_tables() {
        let ball = |r: f64| RadiusReport {
            r_minus: r,
            r_plus: r,
            incenter: [0.0; 3],
            circumcenter: [0.0; 3],
        };
        let t = geombound_check(&[ball(1.0), ball(0.5)], &[0.01, 0.05]);
        assert!(t.thresholds.iter().all(|(_, c)| c.is_infinite()));
        let snaps = [
            RadiusReport { r_plus: 1.1, ..ball(1.0) },
            RadiusReport { r_plus: 0.52, ..ball(0.5) },
            RadiusReport { r_plus: 0.2005, ..ball(0.2) },
        ];
        let t = geombound_check(&snaps, &[0.05, 0.01]);
        assert_eq!(t.thresholds, vec![(0.01, 0.52), (0.05, 1.1)]);
        assert!(t.monotone);
        assert_eq!(geombound_check(&snaps[..1], &[0.01]).rows.len(), 1);
    }
}
