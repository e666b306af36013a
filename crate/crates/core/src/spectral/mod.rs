//! Spectral calculus on S¹ and S².
//!
//! Fields are carried as coefficient vectors in an orthonormal real basis
//! (trigonometric on S¹, real spherical harmonics on S²) together with their
//! values on a quadrature grid. The grids integrate products of two
//! degree-`L` fields exactly, so [`SpectralField::analyze`] inverts
//! [`synthesize`] on band-limited data.
//!
//! Coefficient layout:
//! - S¹: `[a_0, c_1, s_1, c_2, s_2, …]` for `1/√(2π)`, `cos kθ/√π`, `sin kθ/√π`.
//! - S²: index `l² + l + m`, `m ∈ [-l, l]`; `m > 0` pairs with `√2 cos mφ`,
//!   `m < 0` with `√2 sin |m|φ`.

pub mod legendre;
mod point;

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use legendre::{gauss_legendre, tri, LegendreColumn, Recurrence};

pub use point::{rotate, PointDerivatives, PointEvaluator};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Uniform angular grid on S¹.
    Circle { points: usize },
    /// Gauss–Legendre colatitudes × equispaced longitudes on S².
    Sphere { n_theta: usize, n_phi: usize },
}

#[derive(Debug, Clone)]
pub struct SphereGrid {
    dim: usize,
    degree: usize,
    layout: Layout,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    theta: Vec<f64>,
    phi: Vec<f64>,
    legendre: Vec<LegendreColumn>,
    recurrence: Recurrence,
    gl_weights: Vec<f64>,
    // cos(mφ_k), sin(mφ_k) for m = 0..=L (or kθ_k on the circle)
    cos_table: Vec<Vec<f64>>,
    sin_table: Vec<Vec<f64>>,
}

impl SphereGrid {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        match dim {
            1 => Ok(Self::circle(degree)),
            2 => Ok(Self::sphere(degree)),
            d => Err(Error::UnsupportedDimension(d)),
        }
    }

    /// `2L + 2` equispaced points on the circle.
    pub fn circle(degree: usize) -> Self {
        let points = 2 * degree + 2;
        let theta: Vec<f64> = (0..points).map(|j| 2.0 * PI * j as f64 / points as f64).collect();
        let nodes = theta.iter().map(|t| [t.cos(), t.sin(), 0.0]).collect();
        let weights = vec![2.0 * PI / points as f64; points];
        let (cos_table, sin_table) = trig_tables(degree, &theta);
        Self {
            dim: 1,
            degree,
            layout: Layout::Circle { points },
            nodes,
            weights,
            theta,
            phi: Vec::new(),
            legendre: Vec::new(),
            recurrence: Recurrence::new(0),
            gl_weights: Vec::new(),
            cos_table,
            sin_table,
        }
    }

    /// `(L + 1)` Gauss–Legendre colatitudes × `(2L + 2)` longitudes.
    pub fn sphere(degree: usize) -> Self {
        let n_theta = degree + 1;
        let n_phi = 2 * degree + 2;
        let (x, gl_weights) = gauss_legendre(n_theta);
        let theta: Vec<f64> = x.iter().map(|x| x.acos()).collect();
        let phi: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (t, w) in theta.iter().zip(&gl_weights) {
            for p in &phi {
                nodes.push([t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]);
                weights.push(w * dphi);
            }
        }
        let legendre = theta.iter().map(|&t| LegendreColumn::new(degree, t)).collect();
        let (cos_table, sin_table) = trig_tables(degree, &phi);
        Self {
            dim: 2,
            degree,
            layout: Layout::Sphere { n_theta, n_phi },
            nodes,
            weights,
            theta,
            phi,
            legendre,
            recurrence: Recurrence::new(degree),
            gl_weights,
            cos_table,
            sin_table,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Band limit `L` of fields carried on this grid.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn recurrence(&self) -> &Recurrence {
        &self.recurrence
    }

    pub fn coefficient_count(&self) -> usize {
        coefficient_count(self.dim, self.degree)
    }

    /// |Sⁿ|.
    pub fn area(&self) -> f64 {
        if self.dim == 1 {
            2.0 * PI
        } else {
            4.0 * PI
        }
    }

    /// Smallest spacing between grid lines: angular step on S¹, closest
    /// pair of adjacent colatitudes on S².
    pub fn min_spacing(&self) -> f64 {
        match self.layout {
            Layout::Circle { points } => 2.0 * PI / points as f64,
            Layout::Sphere { .. } => self
                .theta
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Colatitude (or circle angle) and longitude of node `i`.
    pub fn angles(&self, i: usize) -> (f64, f64) {
        match self.layout {
            Layout::Circle { .. } => (self.theta[i], 0.0),
            Layout::Sphere { n_phi, .. } => (self.theta[i / n_phi], self.phi[i % n_phi]),
        }
    }

    /// Orthonormal tangent frame at node `i`: `e_θ` (and `e_φ` on S²).
    pub fn frame(&self, i: usize) -> [Vec3; 2] {
        let (t, p) = self.angles(i);
        frame_at(self.dim, t, p)
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Mean over the sphere, `(1/|Sⁿ|) ∫ v`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.integrate(values) / self.area()
    }
}

fn trig_tables(degree: usize, angles: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let cos = (0..=degree)
        .map(|m| angles.iter().map(|a| (m as f64 * a).cos()).collect())
        .collect();
    let sin = (0..=degree)
        .map(|m| angles.iter().map(|a| (m as f64 * a).sin()).collect())
        .collect();
    (cos, sin)
}

pub(crate) fn frame_at(dim: usize, theta: f64, phi: f64) -> [Vec3; 2] {
    if dim == 1 {
        [[-theta.sin(), theta.cos(), 0.0], [0.0; 3]]
    } else {
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        [[ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
    }
}

pub fn coefficient_count(dim: usize, degree: usize) -> usize {
    if dim == 1 {
        2 * degree + 1
    } else {
        (degree + 1) * (degree + 1)
    }
}

/// Index of the real spherical harmonic `(l, m)`.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// A scalar field on the sphere: basis coefficients plus grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralField {
    /// Quadrature projection of grid values onto the basis up to degree `L`.
    pub fn analyze(values: &[f64], grid: &SphereGrid) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: values.len(),
            });
        }
        let coeffs = analyze_values(values, grid);
        let values = synthesize(&coeffs, grid)?;
        Ok(Self { coeffs, values })
    }

    /// Build from coefficients; shorter vectors are zero-padded.
    pub fn from_coefficients(coeffs: &[f64], grid: &SphereGrid) -> Result<Self> {
        let values = synthesize(coeffs, grid)?;
        let mut c = coeffs.to_vec();
        c.resize(grid.coefficient_count(), 0.0);
        Ok(Self { coeffs: c, values })
    }

    pub fn zeros(grid: &SphereGrid) -> Self {
        Self {
            coeffs: vec![0.0; grid.coefficient_count()],
            values: vec![0.0; grid.len()],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn analyze_values(values: &[f64], grid: &SphereGrid) -> Vec<f64> {
    let l_max = grid.degree;
    let mut coeffs = vec![0.0; grid.coefficient_count()];
    match grid.layout {
        Layout::Circle { .. } => {
            let w = &grid.weights;
            let norm0 = 1.0 / (2.0 * PI).sqrt();
            let norm = 1.0 / PI.sqrt();
            coeffs[0] = values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() * norm0;
            for k in 1..=l_max {
                let (mut c, mut s) = (0.0, 0.0);
                for (j, (v, w)) in values.iter().zip(w).enumerate() {
                    c += v * w * grid.cos_table[k][j];
                    s += v * w * grid.sin_table[k][j];
                }
                coeffs[2 * k - 1] = c * norm;
                coeffs[2 * k] = s * norm;
            }
        }
        Layout::Sphere { n_theta, n_phi } => {
            let dphi = 2.0 * PI / n_phi as f64;
            for j in 0..n_theta {
                let row = &values[j * n_phi..(j + 1) * n_phi];
                let leg = &grid.legendre[j];
                let wj = grid.gl_weights[j] * dphi;
                for m in 0..=l_max {
                    let (mut c, mut s) = (0.0, 0.0);
                    for (k, v) in row.iter().enumerate() {
                        c += v * grid.cos_table[m][k];
                        s += v * grid.sin_table[m][k];
                    }
                    let scale = if m == 0 { wj } else { wj * SQRT_2 };
                    for l in m..=l_max {
                        let p = leg.p[tri(l, m)] * scale;
                        let base = l * l + l;
                        coeffs[base + m] += c * p;
                        if m > 0 {
                            coeffs[base - m] += s * p;
                        }
                    }
                }
            }
        }
    }
    coeffs
}

/// Pointwise evaluation of the basis expansion on the grid.
pub fn synthesize(coeffs: &[f64], grid: &SphereGrid) -> Result<Vec<f64>> {
    check_degree(coeffs, grid)?;
    Ok(synth_theta(coeffs, grid, 0))
}

fn check_degree(coeffs: &[f64], grid: &SphereGrid) -> Result<()> {
    if coeffs.len() > grid.coefficient_count() {
        let degree = match grid.dim {
            1 => coeffs.len() / 2,
            _ => (coeffs.len() as f64).sqrt().ceil() as usize - 1,
        };
        return Err(Error::Resolution {
            degree,
            max: grid.degree,
        });
    }
    Ok(())
}

/// Synthesis of `∂_θ^order` of the expansion (circle: angle derivative).
fn synth_theta(coeffs: &[f64], grid: &SphereGrid, order: usize) -> Vec<f64> {
    let l_max = grid.degree;
    let get = |i: usize| coeffs.get(i).copied().unwrap_or(0.0);
    match grid.layout {
        Layout::Circle { points } => {
            let mut c = coeffs.to_vec();
            c.resize(grid.coefficient_count(), 0.0);
            for _ in 0..order {
                c = circle_derivative(&c);
            }
            let norm0 = 1.0 / (2.0 * PI).sqrt();
            let norm = 1.0 / PI.sqrt();
            (0..points)
                .map(|j| {
                    let mut v = c[0] * norm0;
                    for k in 1..=l_max {
                        v += (c[2 * k - 1] * grid.cos_table[k][j] + c[2 * k] * grid.sin_table[k][j]) * norm;
                    }
                    v
                })
                .collect()
        }
        Layout::Sphere { n_theta, n_phi } => {
            let mut out = vec![0.0; n_theta * n_phi];
            let mut a_cos = vec![0.0; l_max + 1];
            let mut a_sin = vec![0.0; l_max + 1];
            for j in 0..n_theta {
                let leg = &grid.legendre[j];
                let table = match order {
                    0 => &leg.p,
                    1 => &leg.dp,
                    2 => &leg.d2p,
                    _ => &leg.d3p,
                };
                for m in 0..=l_max {
                    let (mut c, mut s) = (0.0, 0.0);
                    for l in m..=l_max {
                        let p = table[tri(l, m)];
                        let base = l * l + l;
                        c += get(base + m) * p;
                        if m > 0 {
                            s += get(base - m) * p;
                        }
                    }
                    let scale = if m == 0 { 1.0 } else { SQRT_2 };
                    a_cos[m] = c * scale;
                    a_sin[m] = s * scale;
                }
                for k in 0..n_phi {
                    let mut v = a_cos[0];
                    for m in 1..=l_max {
                        v += a_cos[m] * grid.cos_table[m][k] + a_sin[m] * grid.sin_table[m][k];
                    }
                    out[j * n_phi + k] = v;
                }
            }
            out
        }
    }
}

/// d/dθ on circle coefficients.
pub(crate) fn circle_derivative(c: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; c.len()];
    let l_max = (c.len() - 1) / 2;
    for k in 1..=l_max {
        let kf = k as f64;
        d[2 * k - 1] = kf * c[2 * k];
        d[2 * k] = -kf * c[2 * k - 1];
    }
    d
}

/// ∂/∂φ on spherical-harmonic coefficients.
pub(crate) fn phi_derivative(c: &[f64], degree: usize) -> Vec<f64> {
    let mut d = vec![0.0; c.len()];
    for l in 1..=degree {
        let base = l * l + l;
        for m in 1..=l {
            let mf = m as f64;
            let (a, b) = (c[base + m], c[base - m]);
            d[base + m] = mf * b;
            d[base - m] = -mf * a;
        }
    }
    d
}

/// Coordinate partial derivatives of a field at every node.
///
/// On S² the coordinates are colatitude θ and longitude φ; on S¹ only θ is
/// used and the φ entries stay empty. `order` is at most 3 on S² and at
/// most 4 on S¹ (where `tttt` is filled).
#[derive(Debug, Clone, Default)]
pub struct Partials {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub tt: Vec<f64>,
    pub tp: Vec<f64>,
    pub pp: Vec<f64>,
    pub ttt: Vec<f64>,
    pub ttp: Vec<f64>,
    pub tpp: Vec<f64>,
    pub ppp: Vec<f64>,
    pub tttt: Vec<f64>,
}

pub fn partials(field: &SpectralField, grid: &SphereGrid, order: usize) -> Result<Partials> {
    check_degree(&field.coeffs, grid)?;
    let c = &field.coeffs;
    let mut out = Partials {
        s: field.values.clone(),
        ..Default::default()
    };
    if grid.dim == 1 {
        if order >= 1 {
            out.t = synth_theta(c, grid, 1);
        }
        if order >= 2 {
            out.tt = synth_theta(c, grid, 2);
        }
        if order >= 3 {
            out.ttt = synth_theta(c, grid, 3);
        }
        if order >= 4 {
            out.tttt = synth_theta(c, grid, 4);
        }
        return Ok(out);
    }
    let l = grid.degree;
    let mut c = c.clone();
    c.resize(grid.coefficient_count(), 0.0);
    let cp = phi_derivative(&c, l);
    let cpp = phi_derivative(&cp, l);
    if order >= 1 {
        out.t = synth_theta(&c, grid, 1);
        out.p = synth_theta(&cp, grid, 0);
    }
    if order >= 2 {
        out.tt = synth_theta(&c, grid, 2);
        out.tp = synth_theta(&cp, grid, 1);
        out.pp = synth_theta(&cpp, grid, 0);
    }
    if order >= 3 {
        let cppp = phi_derivative(&cpp, l);
        out.ttt = synth_theta(&c, grid, 3);
        out.ttp = synth_theta(&cp, grid, 2);
        out.tpp = synth_theta(&cpp, grid, 1);
        out.ppp = synth_theta(&cppp, grid, 0);
    }
    Ok(out)
}

/// Covariant gradient and Hessian with respect to the round metric, both
/// expressed in the orthonormal frame returned by [`SphereGrid::frame`].
#[derive(Debug, Clone)]
pub struct TangentDerivatives {
    /// `[∇_θ s, ∇_φ s]`; the second entry is zero on S¹.
    pub gradient: Vec<[f64; 2]>,
    /// `[H_θθ, H_θφ, H_φφ]`; only `H_θθ` is used on S¹.
    pub hessian: Vec<[f64; 3]>,
}

pub fn tangential_derivatives(field: &SpectralField, grid: &SphereGrid) -> Result<TangentDerivatives> {
    let d = partials(field, grid, 2)?;
    let n = grid.len();
    let mut gradient = Vec::with_capacity(n);
    let mut hessian = Vec::with_capacity(n);
    for i in 0..n {
        if grid.dim == 1 {
            gradient.push([d.t[i], 0.0]);
            hessian.push([d.tt[i], 0.0, 0.0]);
        } else {
            let (theta, _) = grid.angles(i);
            let (g, h) = frame_derivatives(theta, d.t[i], d.p[i], d.tt[i], d.tp[i], d.pp[i]);
            gradient.push(g);
            hessian.push(h);
        }
    }
    Ok(TangentDerivatives { gradient, hessian })
}

/// Orthonormal-frame gradient and covariant Hessian on S² from coordinate
/// partials at colatitude `theta` (away from the poles).
pub(crate) fn frame_derivatives(theta: f64, st: f64, sp: f64, stt: f64, stp: f64, spp: f64) -> ([f64; 2], [f64; 3]) {
    let sn = theta.sin();
    let cot = theta.cos() / sn;
    let g = [st, sp / sn];
    let h = [stt, (stp - cot * sp) / sn, spp / (sn * sn) + cot * st];
    (g, h)
}
