//! Off-grid evaluation and rotation of spectral fields.

use std::f64::consts::{PI, SQRT_2};

use super::legendre::tri;
use super::{frame_at, frame_derivatives, Layout, SpectralField, SphereGrid, Vec3};
use crate::error::Result;

/// Cyclic axis permutation `(x, y, z) ↦ (z, x, y)`; moves the poles onto the equator.
const POLE_SWAP: [[f64; 3]; 3] = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

/// Value, gradient and covariant Hessian at one direction, as ambient
/// vectors/matrices living in the tangent plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDerivatives {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: [[f64; 3]; 3],
}

fn angles_of(u: &Vec3) -> (f64, f64) {
    // atan2 keeps full precision next to the poles, where acos does not
    (u[0].hypot(u[1]).atan2(u[2]), u[1].atan2(u[0]))
}

/// `cos(mφ)`, `sin(mφ)` for `m = 0..=degree`.
fn trig(degree: usize, phi: f64) -> (Vec<f64>, Vec<f64>) {
    let (s1, c1) = phi.sin_cos();
    let (mut cos, mut sin) = (vec![1.0; degree + 1], vec![0.0; degree + 1]);
    for m in 1..=degree {
        cos[m] = cos[m - 1] * c1 - sin[m - 1] * s1;
        sin[m] = sin[m - 1] * c1 + cos[m - 1] * s1;
    }
    (cos, sin)
}

/// Value of the expansion at an arbitrary direction `u`.
pub fn value_at(coeffs: &[f64], grid: &SphereGrid, u: &Vec3) -> f64 {
    let get = |i: usize| coeffs.get(i).copied().unwrap_or(0.0);
    let l_max = grid.degree();
    match grid.layout() {
        Layout::Circle { .. } => {
            let t = u[1].atan2(u[0]);
            let mut v = get(0) / (2.0 * PI).sqrt();
            for k in 1..=l_max {
                let kt = k as f64 * t;
                v += (get(2 * k - 1) * kt.cos() + get(2 * k) * kt.sin()) / PI.sqrt();
            }
            v
        }
        Layout::Sphere { .. } => {
            let (theta, phi) = angles_of(u);
            let rec = grid.recurrence();
            let mut p = vec![0.0; rec.len()];
            rec.values_into(theta, &mut p);
            let (cos, sin) = trig(l_max, phi);
            let mut v = 0.0;
            for l in 0..=l_max {
                let base = l * l + l;
                v += get(base) * p[tri(l, 0)];
                for m in 1..=l {
                    v += SQRT_2 * p[tri(l, m)] * (get(base + m) * cos[m] + get(base - m) * sin[m]);
                }
            }
            v
        }
    }
}

/// Support function of the rotated body: `g(v) = s(qᵀ v)`.
pub fn rotate(field: &SpectralField, grid: &SphereGrid, q: &[[f64; 3]; 3]) -> Result<SpectralField> {
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|v| value_at(field.coefficients(), grid, &mat_t_vec(q, v)))
        .collect();
    SpectralField::analyze(&values, grid)
}

fn mat_vec(q: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [0, 1, 2].map(|i| q[i][0] * v[0] + q[i][1] * v[1] + q[i][2] * v[2])
}

fn mat_t_vec(q: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [0, 1, 2].map(|i| q[0][i] * v[0] + q[1][i] * v[1] + q[2][i] * v[2])
}

/// Pointwise derivative evaluation anywhere on the sphere. Directions near
/// the poles are evaluated in a rotated copy of the field where the
/// coordinate frame is regular.
#[derive(Debug, Clone)]
pub struct PointEvaluator<'a> {
    grid: &'a SphereGrid,
    coeffs: Vec<f64>,
    rotated: Option<Vec<f64>>,
}

impl<'a> PointEvaluator<'a> {
    pub fn new(field: &SpectralField, grid: &'a SphereGrid) -> Result<Self> {
        let rotated = if grid.dim() == 2 {
            Some(rotate(field, grid, &POLE_SWAP)?.coefficients().to_vec())
        } else {
            None
        };
        Ok(Self {
            grid,
            coeffs: field.coefficients().to_vec(),
            rotated,
        })
    }

    pub fn grid(&self) -> &SphereGrid {
        self.grid
    }

    pub fn value(&self, u: &Vec3) -> f64 {
        value_at(&self.coeffs, self.grid, u)
    }

    pub fn derivatives(&self, u: &Vec3) -> PointDerivatives {
        if self.grid.dim() == 1 {
            return self.circle_derivatives(u);
        }
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        let u = [u[0] / norm, u[1] / norm, u[2] / norm];
        match &self.rotated {
            Some(rot) if u[2].abs() > 0.8 => {
                let v = mat_vec(&POLE_SWAP, &u);
                let d = sphere_derivatives(rot, self.grid, &v);
                // pull back: grad_s(u) = Pᵀ grad_g(Pu), Hess_s(u) = Pᵀ Hess_g P
                let gradient = mat_t_vec(&POLE_SWAP, &d.gradient);
                let mut hessian = [[0.0; 3]; 3];
                for (i, row) in hessian.iter_mut().enumerate() {
                    for (j, h) in row.iter_mut().enumerate() {
                        *h = (0..3)
                            .flat_map(|a| (0..3).map(move |b| (a, b)))
                            .map(|(a, b)| POLE_SWAP[a][i] * d.hessian[a][b] * POLE_SWAP[b][j])
                            .sum();
                    }
                }
                PointDerivatives {
                    value: d.value,
                    gradient,
                    hessian,
                }
            }
            _ => sphere_derivatives(&self.coeffs, self.grid, &u),
        }
    }

    fn circle_derivatives(&self, u: &Vec3) -> PointDerivatives {
        let t = u[1].atan2(u[0]);
        let get = |i: usize| self.coeffs.get(i).copied().unwrap_or(0.0);
        let (mut s, mut st, mut stt) = (get(0) / (2.0 * PI).sqrt(), 0.0, 0.0);
        for k in 1..=self.grid.degree() {
            let kf = k as f64;
            let (c, sn) = ((kf * t).cos(), (kf * t).sin());
            let (a, b) = (get(2 * k - 1) / PI.sqrt(), get(2 * k) / PI.sqrt());
            s += a * c + b * sn;
            st += kf * (-a * sn + b * c);
            stt -= kf * kf * (a * c + b * sn);
        }
        let [e, _] = frame_at(1, t, 0.0);
        let mut hessian = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                hessian[i][j] = stt * e[i] * e[j];
            }
        }
        PointDerivatives {
            value: s,
            gradient: e.map(|x| st * x),
            hessian,
        }
    }
}

fn sphere_derivatives(coeffs: &[f64], grid: &SphereGrid, u: &Vec3) -> PointDerivatives {
    let (theta, phi) = angles_of(u);
    let rec = grid.recurrence();
    let len = rec.len();
    let mut p = vec![0.0; 3 * len];
    let (p, rest) = p.split_at_mut(len);
    let (dp, d2p) = rest.split_at_mut(len);
    rec.values_into(theta, p);
    rec.derivatives_into(theta, p, dp, d2p);
    let (cos, sin) = trig(grid.degree(), phi);
    let get = |i: usize| coeffs.get(i).copied().unwrap_or(0.0);
    let (mut s, mut st, mut sp, mut stt, mut stp, mut spp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for l in 0..=grid.degree() {
        let base = l * l + l;
        let k = tri(l, 0);
        s += get(base) * p[k];
        st += get(base) * dp[k];
        stt += get(base) * d2p[k];
        for m in 1..=l {
            let k = tri(l, m);
            let mf = m as f64;
            let (c, sn) = (cos[m], sin[m]);
            let (a, b) = (SQRT_2 * get(base + m), SQRT_2 * get(base - m));
            let ang = a * c + b * sn;
            let dang = mf * (-a * sn + b * c);
            s += p[k] * ang;
            st += dp[k] * ang;
            stt += d2p[k] * ang;
            sp += p[k] * dang;
            stp += dp[k] * dang;
            spp -= p[k] * mf * mf * ang;
        }
    }
    let (g, h) = frame_derivatives(theta, st, sp, stt, stp, spp);
    let [e1, e2] = frame_at(2, theta, phi);
    let mut gradient = [0.0; 3];
    let mut hessian = [[0.0; 3]; 3];
    for i in 0..3 {
        gradient[i] = g[0] * e1[i] + g[1] * e2[i];
        for j in 0..3 {
            hessian[i][j] = h[0] * e1[i] * e1[j] + h[1] * (e1[i] * e2[j] + e2[i] * e1[j]) + h[2] * e2[i] * e2[j];
        }
    }
    PointDerivatives {
        value: s,
        gradient,
        hessian,
    }
}
