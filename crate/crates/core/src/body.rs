//! Convex bodies carried by their support function.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{self, sh_index, PointDerivatives, PointEvaluator, SpectralField, SphereGrid, Vec3};
use crate::symmetric;

/// Default relative tolerance on the smallest radius of curvature.
pub const CONVEXITY_TOLERANCE: f64 = 1e-8;

/// A convex body in ℝⁿ⁺¹ given by its support function on Sⁿ.
#[derive(Debug, Clone)]
pub struct SupportFunction {
    field: SpectralField,
    grid: Arc<SphereGrid>,
}

impl SupportFunction {
    pub fn new(field: SpectralField, grid: Arc<SphereGrid>) -> Self {
        Self { field, grid }
    }

    pub fn from_values(values: &[f64], grid: Arc<SphereGrid>) -> Result<Self> {
        let field = SpectralField::analyze(values, &grid)?;
        Ok(Self { field, grid })
    }

    pub fn from_coefficients(coeffs: &[f64], grid: Arc<SphereGrid>) -> Result<Self> {
        let field = SpectralField::from_coefficients(coeffs, &grid)?;
        Ok(Self { field, grid })
    }

    /// Sample `f` on the grid and project to degree `L`.
    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.nodes().iter().map(f).collect();
        Self::from_values(&values, grid)
    }

    pub fn sphere(grid: Arc<SphereGrid>, radius: f64) -> Result<Self> {
        Self::from_fn(grid, |_| radius)
    }

    /// Axis-aligned ellipsoid (ellipse on S¹): `s(u) = (Σ a_i² u_i²)^{1/2}`.
    pub fn ellipsoid(grid: Arc<SphereGrid>, axes: &[f64]) -> Result<Self> {
        let n = grid.dim();
        if axes.len() != n + 1 {
            return Err(Error::Dimension {
                expected: n + 1,
                found: axes.len(),
            });
        }
        if axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Precondition("ellipsoid semi-axes must be positive".into()));
        }
        let axes = axes.to_vec();
        Self::from_fn(grid, move |u| axes.iter().zip(u).map(|(a, x)| a * a * x * x).sum::<f64>().sqrt())
    }

    /// Add `amplitude` times the orthonormal basis function `(l, m)`.
    /// On S¹, `m ≥ 0` selects `cos lθ` and `m < 0` selects `sin lθ`.
    pub fn add_harmonic(&self, l: usize, m: i64, amplitude: f64) -> Result<Self> {
        let index = match self.dim() {
            1 => match (l, m) {
                (0, _) => 0,
                (l, m) if m >= 0 => 2 * l - 1,
                (l, _) => 2 * l,
            },
            _ => {
                if m.unsigned_abs() as usize > l {
                    return Err(Error::Range(format!("harmonic order {m} exceeds degree {l}")));
                }
                sh_index(l, m)
            }
        };
        if l > self.grid.degree() {
            return Err(Error::Resolution {
                degree: l,
                max: self.grid.degree(),
            });
        }
        let mut c = self.field.coefficients().to_vec();
        c[index] += amplitude;
        Self::from_coefficients(&c, self.grid.clone())
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn field(&self) -> &SpectralField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn coefficients(&self) -> &[f64] {
        self.field.coefficients()
    }

    pub fn with_field(&self, field: SpectralField) -> Self {
        Self {
            field,
            grid: self.grid.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let c: Vec<f64> = self.coefficients().iter().map(|c| c * factor).collect();
        Self::from_coefficients(&c, self.grid.clone()).expect("same degree")
    }

    /// Support function of the body translated by `p`: `s + ⟨p, u⟩`.
    pub fn translated(&self, p: &Vec3) -> Self {
        let mut c = self.coefficients().to_vec();
        for (idx, axis, norm) in linear_modes(self.dim()) {
            c[idx] += p[axis] * norm;
        }
        Self::from_coefficients(&c, self.grid.clone()).expect("same degree")
    }

    /// Steiner point `((n+1)/|Sⁿ|) ∫ s u du`, read off the degree-1 modes.
    pub fn steiner_point(&self) -> Vec3 {
        let mut p = [0.0; 3];
        let c = self.coefficients();
        for (idx, axis, norm) in linear_modes(self.dim()) {
            p[axis] = c[idx] / norm;
        }
        p
    }

    pub fn evaluator(&self) -> Result<PointEvaluator<'_>> {
        PointEvaluator::new(&self.field, &self.grid)
    }

    /// Positivity of `s` and positive definiteness of the radii matrix.
    pub fn validate(&self) -> Result<()> {
        check_positive(self)?;
        curvature(self).map(|_| ())
    }
}

/// `(coefficient index, ambient axis, factor)` with `u_axis = factor · basis`.
fn linear_modes(dim: usize) -> Vec<(usize, usize, f64)> {
    if dim == 1 {
        let r = PI.sqrt();
        vec![(1, 0, r), (2, 1, r)]
    } else {
        let r = (4.0 * PI / 3.0).sqrt();
        vec![(sh_index(1, 1), 0, r), (sh_index(1, -1), 1, r), (sh_index(1, 0), 2, r)]
    }
}

fn check_positive(body: &SupportFunction) -> Result<()> {
    let (node, value) = body
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if value <= 0.0 {
        return Err(Error::SupportNotPositive { node, value });
    }
    Ok(())
}

/// Per-node curvature data. Arrays are sized for n = 2; on S¹ only the
/// first entry of each pair is meaningful.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    dim: usize,
    /// Radii of curvature, ascending.
    pub radii: Vec<[f64; 2]>,
    /// Principal curvatures `κ_1 ≤ … ≤ κ_n`.
    pub kappa: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub norm2: Vec<f64>,
    pub traceless2: Vec<f64>,
    pub cubic: Vec<f64>,
    /// Normalized `E_0, …, E_n`.
    pub ek: Vec<[f64; 3]>,
    /// Area element of the Gauss-map pullback, `det R`.
    pub det_r: Vec<f64>,
}

impl CurvatureField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn kappa(&self, i: usize) -> &[f64] {
        &self.kappa[i][..self.dim]
    }

    pub fn radii(&self, i: usize) -> &[f64] {
        &self.radii[i][..self.dim]
    }

    pub fn ek(&self, i: usize) -> &[f64] {
        &self.ek[i][..=self.dim]
    }

    pub fn max_mean(&self) -> f64 {
        self.mean.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max ‖Å‖²/H²` over nodes.
    pub fn pinch_max(&self) -> f64 {
        self.traceless2
            .iter()
            .zip(&self.mean)
            .map(|(a, h)| a / (h * h))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Principal quantities from radii at one point.
pub(crate) fn quantities(radii: &[f64]) -> ([f64; 2], [f64; 2], f64, f64, f64, f64, [f64; 3], f64) {
    let n = radii.len();
    let mut r = [0.0; 2];
    let mut k = [0.0; 2];
    r[..n].copy_from_slice(radii);
    r[..n].sort_by(|a, b| a.total_cmp(b));
    for i in 0..n {
        k[i] = 1.0 / r[n - 1 - i];
    }
    let ks = &k[..n];
    let h: f64 = ks.iter().sum();
    let a2: f64 = ks.iter().map(|x| x * x).sum();
    let mut tl = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            tl += (ks[i] - ks[j]).powi(2);
        }
    }
    tl /= n as f64;
    let c: f64 = ks.iter().map(|x| x * x * x).sum();
    let mut e = [0.0; 3];
    e[..=n].copy_from_slice(&symmetric::normalized(ks));
    let det: f64 = r[..n].iter().product();
    (r, k, h, a2, tl, c, e, det)
}

/// Eigenvalues of a symmetric 2×2 `[[a, b], [b, c]]`, ascending.
pub(crate) fn sym2_eigen(a: f64, b: f64, c: f64) -> [f64; 2] {
    let m = 0.5 * (a + c);
    let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let hi = m + d;
    let det = a * c - b * b;
    let lo = if hi.abs() > 0.0 && m > 0.0 { det / hi } else { m - d };
    [lo, hi]
}

/// Radii matrix components `[R_θθ, R_θφ, R_φφ]` (only the first on S¹).
pub fn radii_matrix(body: &SupportFunction) -> Result<Vec<[f64; 3]>> {
    let d = spectral::tangential_derivatives(body.field(), body.grid())?;
    Ok(d.hessian
        .iter()
        .zip(body.values())
        .map(|(h, s)| [h[0] + s, h[1], h[2] + s])
        .collect())
}

pub fn curvature(body: &SupportFunction) -> Result<CurvatureField> {
    curvature_with_tolerance(body, CONVEXITY_TOLERANCE)
}

pub fn curvature_with_tolerance(body: &SupportFunction, tolerance: f64) -> Result<CurvatureField> {
    let n = body.dim();
    let rm = radii_matrix(body)?;
    let scale = body.grid().mean(body.values()).abs();
    let len = rm.len();
    let mut out = CurvatureField {
        dim: n,
        radii: Vec::with_capacity(len),
        kappa: Vec::with_capacity(len),
        mean: Vec::with_capacity(len),
        norm2: Vec::with_capacity(len),
        traceless2: Vec::with_capacity(len),
        cubic: Vec::with_capacity(len),
        ek: Vec::with_capacity(len),
        det_r: Vec::with_capacity(len),
    };
    let mut worst = (0, f64::INFINITY);
    for (i, m) in rm.iter().enumerate() {
        let eig = if n == 1 { [m[0], 0.0] } else { sym2_eigen(m[0], m[1], m[2]) };
        if eig[0] < worst.1 {
            worst = (i, eig[0]);
        }
        let (r, k, h, a2, tl, c, e, det) = quantities(&eig[..n]);
        out.radii.push(r);
        out.kappa.push(k);
        out.mean.push(h);
        out.norm2.push(a2);
        out.traceless2.push(tl);
        out.cubic.push(c);
        out.ek.push(e);
        out.det_r.push(det);
    }
    if !(worst.1 > tolerance * scale) {
        return Err(Error::ConvexityLost {
            node: worst.0,
            eigenvalue: worst.1,
            direction: body.grid().nodes()[worst.0],
        });
    }
    Ok(out)
}

/// Radii of curvature at an arbitrary direction from pointwise derivatives.
pub fn radii_at(d: &PointDerivatives, u: &Vec3, dim: usize) -> Vec<f64> {
    let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let u = u.map(|x| x / norm);
    let (e1, e2) = tangent_basis(&u, dim);
    let form = |a: &Vec3, b: &Vec3| -> f64 {
        (0..3)
            .map(|i| (0..3).map(|j| a[i] * d.hessian[i][j] * b[j]).sum::<f64>())
            .sum()
    };
    if dim == 1 {
        return vec![form(&e1, &e1) + d.value];
    }
    sym2_eigen(form(&e1, &e1) + d.value, form(&e1, &e2), form(&e2, &e2) + d.value).to_vec()
}

/// Some orthonormal basis of the tangent plane at `u`.
pub(crate) fn tangent_basis(u: &Vec3, dim: usize) -> (Vec3, Vec3) {
    if dim == 1 {
        return ([-u[1], u[0], 0.0], [0.0; 3]);
    }
    let a = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = a[0] * u[0] + a[1] * u[1] + a[2] * u[2];
    let mut e1 = [a[0] - d * u[0], a[1] - d * u[1], a[2] - d * u[2]];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|x| *x /= n1);
    let e2 = [
        u[1] * e1[2] - u[2] * e1[1],
        u[2] * e1[0] - u[0] * e1[2],
        u[0] * e1[1] - u[1] * e1[0],
    ];
    (e1, e2)
}

/// Points of the hypersurface indexed by their outward normals.
#[derive(Debug, Clone)]
pub struct EmbeddingSample {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

/// `X = s u + ∇̄s` at every node.
pub fn embed(body: &SupportFunction) -> Result<EmbeddingSample> {
    let grid = body.grid();
    let d = spectral::tangential_derivatives(body.field(), grid)?;
    let positions = (0..grid.len())
        .map(|i| {
            let u = grid.nodes()[i];
            let [e1, e2] = grid.frame(i);
            let g = d.gradient[i];
            let s = body.values()[i];
            [0, 1, 2].map(|k| s * u[k] + g[0] * e1[k] + g[1] * e2[k])
        })
        .collect();
    Ok(EmbeddingSample {
        positions,
        normals: grid.nodes().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchingStatus {
    /// `max ‖Å‖²/H²` over nodes.
    pub max_ratio: f64,
    pub worst_node: usize,
    /// Strictly inside the cone `‖Å‖² < δ₀H²` at every node.
    pub inside: bool,
}

pub fn pinching_status(curv: &CurvatureField, delta0: f64) -> Result<PinchingStatus> {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (a, h)) in curv.traceless2.iter().zip(&curv.mean).enumerate() {
        if !(*h > 0.0) {
            return Err(Error::NonPositiveMeanCurvature { node: i, value: *h });
        }
        let r = a / (h * h);
        if r > best.1 {
            best = (i, r);
        }
    }
    Ok(PinchingStatus {
        max_ratio: best.1,
        worst_node: best.0,
        inside: best.1 < delta0,
    })
}

/// Move the origin to the Steiner point.
pub fn recenter(body: &SupportFunction) -> SupportFunction {
    recenter_at(body, &body.steiner_point())
}

/// Move the origin to `p`: `s ↦ s − ⟨p, u⟩`.
pub fn recenter_at(body: &SupportFunction, p: &Vec3) -> SupportFunction {
    body.translated(&p.map(|x| -x))
}

/// Unit sphere plus seeded harmonics of degree 2 to 4 with amplitudes up to
/// `amplitude`. The perturbation is halved until the body is convex with
/// `max ‖Å‖²/H² < max_ratio` (no constraint on curves).
pub fn random_pinched_body(grid: Arc<SphereGrid>, seed: u64, amplitude: f64, max_ratio: f64) -> Result<SupportFunction> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for l in 2..=4usize {
        let orders: Vec<i64> = if grid.dim() == 1 {
            vec![l as i64, -(l as i64)]
        } else {
            (-(l as i64)..=l as i64).collect()
        };
        for m in orders {
            terms.push((l, m, rng.random_range(-amplitude..=amplitude)));
        }
    }
    let mut scale = 1.0;
    for _ in 0..30 {
        let mut body = SupportFunction::sphere(grid.clone(), 1.0)?;
        for &(l, m, a) in &terms {
            body = body.add_harmonic(l, m, scale * a)?;
        }
        let ok = body.validate().is_ok()
            && (grid.dim() < 2 || curvature(&body).and_then(|c| pinching_status(&c, max_ratio)).is_ok_and(|p| p.inside));
        if ok {
            return Ok(body);
        }
        scale *= 0.5;
    }
    Err(Error::Precondition("no admissible perturbation found".into()))
}
