//! Symmetric, homogeneous speed functions of the principal curvatures.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::body::CurvatureField;
use crate::error::{Error, Result};
use crate::symmetric::{binomial, elementary_without};

/// A symmetric function `f(κ_1, …, κ_n)` homogeneous of degree `alpha`.
pub trait Speed: Debug + Send + Sync {
    fn name(&self) -> String;
    fn alpha(&self) -> f64;
    fn value(&self, kappa: &[f64]) -> f64;
    fn gradient(&self, kappa: &[f64]) -> Vec<f64>;
    fn hessian(&self, kappa: &[f64]) -> Vec<Vec<f64>>;
}

/// `f = H^α`.
#[derive(Debug, Clone, Copy)]
pub struct PowMean {
    pub alpha: f64,
}

impl Speed for PowMean {
    fn name(&self) -> String {
        "pow_mean".into()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn value(&self, kappa: &[f64]) -> f64 {
        kappa.iter().sum::<f64>().powf(self.alpha)
    }

    fn gradient(&self, kappa: &[f64]) -> Vec<f64> {
        let h: f64 = kappa.iter().sum();
        vec![self.alpha * h.powf(self.alpha - 1.0); kappa.len()]
    }

    fn hessian(&self, kappa: &[f64]) -> Vec<Vec<f64>> {
        let h: f64 = kappa.iter().sum();
        let v = self.alpha * (self.alpha - 1.0) * h.powf(self.alpha - 2.0);
        vec![vec![v; kappa.len()]; kappa.len()]
    }
}

/// `f = n^α E_k^{α/k}`; `k = None` means `k = n` (Gauss curvature power).
#[derive(Debug, Clone, Copy)]
pub struct PowEk {
    pub k: Option<usize>,
    pub alpha: f64,
}

impl PowEk {
    fn order(&self, n: usize) -> usize {
        self.k.unwrap_or(n).min(n)
    }

    // E_k and its first and second partials
    fn ek_parts(&self, kappa: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = kappa.len();
        let k = self.order(n);
        let c = binomial(n, k);
        let e = elementary_without(kappa, k, &[]) / c;
        let d1 = (0..n).map(|i| elementary_without(kappa, k - 1, &[i]) / c).collect();
        let mut d2 = vec![vec![0.0; n]; n];
        if k >= 2 {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        d2[i][j] = elementary_without(kappa, k - 2, &[i, j]) / c;
                    }
                }
            }
        }
        (e, d1, d2)
    }
}

impl Speed for PowEk {
    fn name(&self) -> String {
        match self.k {
            Some(k) => format!("pow_Ek:{k}"),
            None => "pow_gauss".into(),
        }
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn value(&self, kappa: &[f64]) -> f64 {
        let n = kappa.len();
        let p = self.alpha / self.order(n) as f64;
        let (e, _, _) = self.ek_parts(kappa);
        (n as f64).powf(self.alpha) * e.powf(p)
    }

    fn gradient(&self, kappa: &[f64]) -> Vec<f64> {
        let n = kappa.len();
        let p = self.alpha / self.order(n) as f64;
        let (e, d1, _) = self.ek_parts(kappa);
        let scale = (n as f64).powf(self.alpha) * p * e.powf(p - 1.0);
        d1.iter().map(|d| scale * d).collect()
    }

    fn hessian(&self, kappa: &[f64]) -> Vec<Vec<f64>> {
        let n = kappa.len();
        let p = self.alpha / self.order(n) as f64;
        let (e, d1, d2) = self.ek_parts(kappa);
        let c = (n as f64).powf(self.alpha) * p;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| c * ((p - 1.0) * e.powf(p - 2.0) * d1[i] * d1[j] + e.powf(p - 1.0) * d2[i][j]))
                    .collect()
            })
            .collect()
    }
}

/// `f = n^{α/2} (Σ κ_i²)^{α/2}`.
#[derive(Debug, Clone, Copy)]
pub struct PowNorm {
    pub alpha: f64,
}

impl Speed for PowNorm {
    fn name(&self) -> String {
        "pow_norm".into()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn value(&self, kappa: &[f64]) -> f64 {
        let n = kappa.len() as f64;
        let q: f64 = kappa.iter().map(|x| x * x).sum();
        (n * q).powf(0.5 * self.alpha)
    }

    fn gradient(&self, kappa: &[f64]) -> Vec<f64> {
        let n = kappa.len() as f64;
        let q: f64 = kappa.iter().map(|x| x * x).sum();
        let scale = self.alpha * n.powf(0.5 * self.alpha) * q.powf(0.5 * self.alpha - 1.0);
        kappa.iter().map(|k| scale * k).collect()
    }

    fn hessian(&self, kappa: &[f64]) -> Vec<Vec<f64>> {
        let len = kappa.len();
        let n = len as f64;
        let a = self.alpha;
        let q: f64 = kappa.iter().map(|x| x * x).sum();
        let c = a * n.powf(0.5 * a);
        (0..len)
            .map(|i| {
                (0..len)
                    .map(|j| {
                        let diag = if i == j { q.powf(0.5 * a - 1.0) } else { 0.0 };
                        c * (diag + (a - 2.0) * q.powf(0.5 * a - 2.0) * kappa[i] * kappa[j])
                    })
                    .collect()
            })
            .collect()
    }
}

/// A speed together with its cone parameter.
#[derive(Debug, Clone)]
pub struct SpeedSpec {
    speed: Arc<dyn Speed>,
    delta0: Option<f64>,
}

impl SpeedSpec {
    pub fn new(speed: Arc<dyn Speed>, delta0: Option<f64>) -> Result<Self> {
        let alpha = speed.alpha();
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidSpeed(format!("degree alpha = {alpha} must exceed 1")));
        }
        if let Some(d) = delta0 {
            if !(d > 0.0) {
                return Err(Error::InvalidSpeed(format!("delta0 = {d} must be positive")));
            }
        }
        Ok(Self { speed, delta0 })
    }

    /// Built-in speeds by name: `pow_mean`, `pow_Ek` (needs `k`), `pow_gauss`, `pow_norm`.
    pub fn builtin(name: &str, k: Option<usize>, alpha: f64, delta0: Option<f64>) -> Result<Self> {
        let speed: Arc<dyn Speed> = match name {
            "pow_mean" => Arc::new(PowMean { alpha }),
            "pow_Ek" => {
                let k = k.ok_or_else(|| Error::InvalidSpeed("pow_Ek needs an order, e.g. pow_Ek:2".into()))?;
                if k == 0 {
                    return Err(Error::InvalidSpeed("pow_Ek order must be at least 1".into()));
                }
                Arc::new(PowEk { k: Some(k), alpha })
            }
            "pow_gauss" => Arc::new(PowEk { k: None, alpha }),
            "pow_norm" => Arc::new(PowNorm { alpha }),
            other => return Err(Error::InvalidSpeed(format!("unknown speed '{other}'"))),
        };
        Self::new(speed, delta0)
    }

    /// Parse `name[:k][,alpha=<real>][,delta0=<real>]`; alpha defaults to 2.
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split(',').map(str::trim);
        let head = parts.next().unwrap_or_default();
        let (name, k) = match head.split_once(':') {
            Some((name, k)) => {
                let k = k
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad order in '{head}'")))?;
                (name.trim(), Some(k))
            }
            None => (head, None),
        };
        let mut alpha = 2.0;
        let mut delta0 = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, found '{part}'")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number in '{part}'")))?;
            match key.trim() {
                "alpha" => alpha = value,
                "delta0" => delta0 = Some(value),
                other => return Err(Error::Parse(format!("unknown speed parameter '{other}'"))),
            }
        }
        if name != "pow_Ek" && k.is_some() {
            return Err(Error::Parse(format!("speed '{name}' takes no order")));
        }
        Self::builtin(name, k, alpha, delta0)
    }

    pub fn name(&self) -> String {
        self.speed.name()
    }

    /// Canonical grammar string.
    pub fn describe(&self) -> String {
        let mut s = format!("{},alpha={}", self.name(), self.alpha());
        if let Some(d) = self.delta0 {
            s.push_str(&format!(",delta0={d}"));
        }
        s
    }

    pub fn alpha(&self) -> f64 {
        self.speed.alpha()
    }

    pub fn speed(&self) -> &Arc<dyn Speed> {
        &self.speed
    }

    /// Cone parameter; defaults to `0.9/(n(n−1))`. Unrestricted on curves.
    pub fn delta0(&self, n: usize) -> f64 {
        if n < 2 {
            return f64::INFINITY;
        }
        self.delta0.unwrap_or(0.9 / (n * (n - 1)) as f64)
    }

    /// Check the cone parameter and the order of `pow_Ek` against `n`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if n >= 2 {
            let d = self.delta0(n);
            let cap = 1.0 / (n * (n - 1)) as f64;
            if !(d < cap) {
                return Err(Error::InvalidSpeed(format!("delta0 = {d} must lie below 1/(n(n-1)) = {cap}")));
            }
        }
        let name = self.name();
        if let Some(k) = name.strip_prefix("pow_Ek:") {
            let k: usize = k.parse().unwrap_or(0);
            if k > n {
                return Err(Error::InvalidSpeed(format!("pow_Ek order {k} exceeds dimension {n}")));
            }
        }
        Ok(())
    }

    /// `c_f = f(1, …, 1)`.
    pub fn normalization(&self, n: usize) -> f64 {
        self.speed.value(&vec![1.0; n])
    }

    pub fn value(&self, kappa: &[f64]) -> f64 {
        let f = self.speed.value(kappa);
        #[cfg(debug_assertions)]
        {
            let g = self.speed.gradient(kappa);
            let euler: f64 = kappa.iter().zip(&g).map(|(k, g)| k * g).sum();
            debug_assert!(
                (self.alpha() * f - euler).abs() <= 1e-9 * f.abs().max(f64::MIN_POSITIVE),
                "Euler relation fails at {kappa:?}"
            );
        }
        f
    }

    pub fn gradient(&self, kappa: &[f64]) -> Vec<f64> {
        self.speed.gradient(kappa)
    }

    pub fn hessian(&self, kappa: &[f64]) -> Vec<Vec<f64>> {
        self.speed.hessian(kappa)
    }
}

/// Speed data on every node of a curvature field.
#[derive(Debug, Clone)]
pub struct SpeedEvaluation {
    pub value: Vec<f64>,
    /// Smallest and largest eigenvalue of `Ḟ`, i.e. of `∂f/∂κ_i`.
    pub dot_min: Vec<f64>,
    pub dot_max: Vec<f64>,
    /// `trace Ḟ = Σ ∂f/∂κ_i`.
    pub dot_trace: Vec<f64>,
}

pub fn evaluate(spec: &SpeedSpec, curv: &CurvatureField) -> SpeedEvaluation {
    let len = curv.len();
    let mut out = SpeedEvaluation {
        value: Vec::with_capacity(len),
        dot_min: Vec::with_capacity(len),
        dot_max: Vec::with_capacity(len),
        dot_trace: Vec::with_capacity(len),
    };
    for i in 0..len {
        let k = curv.kappa(i);
        out.value.push(spec.value(k));
        let g = spec.gradient(k);
        out.dot_min.push(g.iter().copied().fold(f64::INFINITY, f64::min));
        out.dot_max.push(g.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        out.dot_trace.push(g.iter().sum());
    }
    out
}

/// `κ = (H/n)(1 + ρ ξ)` with `ξ` a uniformly random traceless unit vector
/// and `ρ = ρ_max · u^{1/2}`, so `‖Å‖² = ρ² H²/n²`.
pub fn sample_pinched(rng: &mut impl Rng, n: usize, h: f64, rho_max: f64) -> Vec<f64> {
    let xi = traceless_unit(rng, n);
    let rho = rho_max * rng.random::<f64>().sqrt();
    xi.iter().map(|x| h / n as f64 * (1.0 + rho * x)).collect()
}

pub(crate) fn traceless_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Largest `ρ` keeping `(1 + ρξ)` inside the cone `‖Å‖² < δ H²`.
pub fn cone_rho(n: usize, delta: f64) -> f64 {
    n as f64 * delta.sqrt()
}

/// Run `samples` independent draws in parallel with per-chunk RNG streams.
pub(crate) fn par_samples<T: Send>(
    samples: usize,
    seed: u64,
    f: impl Fn(&mut ChaCha8Rng) -> T + Sync,
) -> Vec<T> {
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            (0..count).map(|_| f(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    Positivity,
    Monotonicity,
    Homogeneity,
    Euler,
    Normalization,
    GradientAccuracy,
    GradientSymmetry,
    DerivativeHomogeneity,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub condition: Condition,
    pub kappa: Vec<f64>,
    /// Size of the defect (relative where applicable).
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub speed: String,
    pub n: usize,
    pub samples: usize,
    pub violations: Vec<Violation>,
    /// Largest relative deviation between analytic and central-difference gradients.
    pub max_gradient_error: f64,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Monte-Carlo check of positivity, monotonicity, homogeneity, the Euler
/// relation and the normalization on the cone `‖Å‖² < δ₀H²`.
pub fn check_conditions(spec: &SpeedSpec, n: usize, samples: usize, seed: u64) -> ConditionReport {
    let alpha = spec.alpha();
    let speed = spec.speed().clone();
    let rho_max = if n >= 2 { cone_rho(n, spec.delta0(n)) } else { 0.0 };
    let mut violations = Vec::new();
    let norm = speed.value(&vec![1.0; n]);
    let target = (n as f64).powf(alpha);
    if (norm / target - 1.0).abs() > 1e-12 {
        violations.push(Violation {
            condition: Condition::Normalization,
            kappa: vec![1.0; n],
            defect: norm / target - 1.0,
        });
    }
    let results = par_samples(samples, seed, |rng| {
        let h = 10f64.powf(rng.random_range(-1.0..1.0));
        let kappa = sample_pinched(rng, n, h, rho_max * (1.0 - 1e-9));
        let mut found = Vec::new();
        let f = speed.value(&kappa);
        let g = speed.gradient(&kappa);
        if !(f > 0.0) {
            found.push((Condition::Positivity, f));
        }
        if let Some(gmin) = g.iter().copied().reduce(f64::min) {
            if !(gmin > 0.0) {
                found.push((Condition::Monotonicity, gmin));
            }
        }
        for k in [0.5, 2.0] {
            let scaled: Vec<f64> = kappa.iter().map(|x| k * x).collect();
            let rel = speed.value(&scaled) / (k.powf(alpha) * f) - 1.0;
            if !(rel.abs() <= 1e-9) {
                found.push((Condition::Homogeneity, rel));
            }
            let gs = speed.gradient(&scaled);
            let gmax = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let worst = gs
                .iter()
                .zip(&g)
                .map(|(a, b)| (a - k.powf(alpha - 1.0) * b).abs())
                .fold(0.0, f64::max)
                / (k.powf(alpha - 1.0) * gmax);
            if !(worst <= 1e-9) {
                found.push((Condition::DerivativeHomogeneity, worst));
            }
        }
        let euler: f64 = kappa.iter().zip(&g).map(|(k, g)| k * g).sum();
        let rel = (alpha * f - euler) / f;
        if !(rel.abs() <= 1e-9) {
            found.push((Condition::Euler, rel));
        }
        // central differences
        let step = 1e-6 * kappa.iter().map(|x| x * x).sum::<f64>().sqrt();
        let gmax = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let mut grad_err: f64 = 0.0;
        for i in 0..n {
            let mut kp = kappa.clone();
            let mut km = kappa.clone();
            kp[i] += step;
            km[i] -= step;
            let fd = (speed.value(&kp) - speed.value(&km)) / (2.0 * step);
            grad_err = grad_err.max((fd - g[i]).abs() / gmax);
        }
        if !(grad_err <= 1e-5) {
            found.push((Condition::GradientAccuracy, grad_err));
        }
        // permutation: reverse order
        let rev: Vec<f64> = kappa.iter().rev().copied().collect();
        let grev = speed.gradient(&rev);
        let sym = g
            .iter()
            .zip(grev.iter().rev())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / gmax;
        if !(sym <= 1e-12) {
            found.push((Condition::GradientSymmetry, sym));
        }
        (kappa, found, grad_err)
    });
    let mut max_gradient_error: f64 = 0.0;
    for (kappa, found, err) in results {
        max_gradient_error = max_gradient_error.max(err);
        for (condition, defect) in found {
            violations.push(Violation {
                condition,
                kappa: kappa.clone(),
                defect,
            });
        }
    }
    ConditionReport {
        speed: spec.describe(),
        n,
        samples,
        violations,
        max_gradient_error,
    }
}

fn random_symmetric_unit(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = gaussian(rng);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let norm = b.norm();
    b / norm
}

/// `t ↦ f(eig(diag(κ) + tB))`.
fn along_line(speed: &dyn Speed, kappa: &[f64], b: &DMatrix<f64>, t: f64) -> f64 {
    let n = kappa.len();
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(kappa)) + b * t;
    let eig = SymmetricEigen::new(m).eigenvalues;
    let mut e: Vec<f64> = eig.iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    debug_assert_eq!(e.len(), n);
    speed.value(&e)
}

/// Second variation `F̈(A)[B, B]` at `A = diag(κ)` by central differences of
/// the eigenvalue representation.
pub fn second_variation_fd(speed: &dyn Speed, kappa: &[f64], b: &DMatrix<f64>) -> f64 {
    let scale: f64 = kappa.iter().sum::<f64>().abs();
    let h = 1e-4 * scale.max(1e-3);
    (along_line(speed, kappa, b, h) - 2.0 * along_line(speed, kappa, b, 0.0) + along_line(speed, kappa, b, -h))
        / (h * h)
}

/// Same quantity from `∂f`, `∂²f`: `Σ f_ij B_ii B_jj + Σ_{i≠j} (f_i − f_j)/(κ_i − κ_j) B_ij²`.
pub fn second_variation_analytic(speed: &dyn Speed, kappa: &[f64], b: &DMatrix<f64>) -> f64 {
    let n = kappa.len();
    let g = speed.gradient(kappa);
    let hs = speed.hessian(kappa);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += hs[i][j] * b[(i, i)] * b[(j, j)];
            if i != j {
                let dk = kappa[i] - kappa[j];
                let q = if dk.abs() > 1e-9 * kappa[i].abs() {
                    (g[i] - g[j]) / dk
                } else {
                    hs[i][i] - hs[i][j]
                };
                total += q * b[(i, j)] * b[(i, j)];
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuEstimate {
    pub mu: f64,
    pub samples: usize,
}

/// `μ̂ = max |F̈(A)[B, B]|` over sampled `A` with `tr A = 1`, `κ(A)` in the
/// cone, and unit symmetric `B`.
pub fn estimate_mu(spec: &SpeedSpec, n: usize, samples: usize, seed: u64) -> MuEstimate {
    let rho_max = if n >= 2 { cone_rho(n, spec.delta0(n)) } else { 0.0 };
    let speed = spec.speed().clone();
    let values = par_samples(samples, seed, |rng| {
        let kappa = sample_pinched(rng, n, 1.0, rho_max * (1.0 - 1e-6));
        let b = random_symmetric_unit(rng, n);
        second_variation_fd(speed.as_ref(), &kappa, &b).abs()
    });
    MuEstimate {
        mu: values.into_iter().fold(0.0, f64::max),
        samples,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub speed: String,
    pub n: usize,
    pub mu: f64,
    pub samples: usize,
    /// Eigenvalues of `Ḟ` outside `αH^{α−1} ± μH^{α−2}‖Å‖`.
    pub derivative_violations: usize,
    /// `F` outside `H^α ± (μ/2)H^{α−2}‖Å‖²`.
    pub value_violations: usize,
    /// `F` outside the narrower band `H^α ± (μ/2α)H^{α−2}‖Å‖²`.
    pub narrow_value_violations: usize,
    pub worst_witness: Option<Vec<f64>>,
    /// Smallest slack of the derivative and value bands, relative to `H^{α−1}` and `H^α`.
    pub min_slack: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.derivative_violations == 0 && self.value_violations == 0
    }
}

pub fn verify_derivative_bounds(spec: &SpeedSpec, n: usize, mu: f64, samples: usize, seed: u64) -> BoundReport {
    let alpha = spec.alpha();
    let rho_max = if n >= 2 { cone_rho(n, spec.delta0(n)) } else { 0.0 };
    let speed = spec.speed().clone();
    let tol = 1e-12;
    let results = par_samples(samples, seed, |rng| {
        let h = 10f64.powf(rng.random_range(-1.0..1.0));
        let kappa = sample_pinched(rng, n, h, rho_max * (1.0 - 1e-9));
        let f = speed.value(&kappa);
        let g = speed.gradient(&kappa);
        let hsum: f64 = kappa.iter().sum();
        let a2: f64 = kappa.iter().map(|k| (k - hsum / n as f64).powi(2)).sum();
        let centre = alpha * hsum.powf(alpha - 1.0);
        let width = mu * hsum.powf(alpha - 2.0) * a2.sqrt();
        let dslack = g
            .iter()
            .map(|gi| width - (gi - centre).abs())
            .fold(f64::INFINITY, f64::min)
            / hsum.powf(alpha - 1.0);
        let ha = hsum.powf(alpha);
        let vwidth = 0.5 * mu * hsum.powf(alpha - 2.0) * a2;
        let vslack = (vwidth - (f - ha).abs()) / ha;
        let narrow = (vwidth / alpha - (f - ha).abs()) / ha;
        (kappa, dslack, vslack, narrow)
    });
    let mut report = BoundReport {
        speed: spec.describe(),
        n,
        mu,
        samples,
        derivative_violations: 0,
        value_violations: 0,
        narrow_value_violations: 0,
        worst_witness: None,
        min_slack: f64::INFINITY,
    };
    for (kappa, d, v, narrow) in results {
        if d < -tol {
            report.derivative_violations += 1;
        }
        if v < -tol {
            report.value_violations += 1;
        }
        if narrow < -tol {
            report.narrow_value_violations += 1;
        }
        let s = d.min(v);
        if s < report.min_slack {
            report.min_slack = s;
            report.worst_witness = Some(kappa);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> SpeedSpec {
        SpeedSpec::parse(text).unwrap()
    }

    #[test]
    fn builtin_examples() {
        assert!((spec("pow_mean").value(&[1.0, 2.0]) - 9.0).abs() < 1e-12);
        assert!((spec("pow_Ek:2").value(&[1.0, 1.0]) - 4.0).abs() < 1e-12);
        assert!((spec("pow_norm").value(&[1.0, 2.0]) - 10.0).abs() < 1e-12);
        // K = κ1κ2 = 2, n^α K^{α/2} = 4·2
        assert!((spec("pow_gauss").value(&[1.0, 2.0]) - 8.0).abs() < 1e-12);
        for name in ["pow_mean", "pow_Ek:1", "pow_gauss", "pow_norm"] {
            for n in 1..=4 {
                let s = spec(&format!("{name},alpha=2.5"));
                assert!((s.normalization(n) / (n as f64).powf(2.5) - 1.0).abs() < 1e-13);
            }
        }
        // every builtin is κ^α on curves
        for name in ["pow_mean", "pow_gauss", "pow_norm"] {
            assert!((spec(name).value(&[1.7]) - 1.7f64.powi(2)).abs() < 1e-13);
        }
    }

    #[test]
    fn grammar() {
        let s = spec("pow_Ek:2, alpha=3, delta0=0.1");
        assert_eq!(s.name(), "pow_Ek:2");
        assert_eq!(s.alpha(), 3.0);
        assert_eq!(s.delta0(2), 0.1);
        assert_eq!(spec("pow_mean").delta0(3), 0.15);
        assert_eq!(spec("pow_mean").delta0(2), 0.45);
        for bad in ["pow_foo", "pow_mean,alpha=1", "pow_mean,alpha=x", "pow_mean:2", "pow_Ek", "pow_mean,beta=2"] {
            assert!(SpeedSpec::parse(bad).is_err(), "{bad}");
        }
        assert!(spec("pow_mean,delta0=0.6").validate_for(2).is_err());
        assert!(spec("pow_Ek:3").validate_for(2).is_err());
        assert!(spec("pow_Ek:2").validate_for(3).is_ok());
    }

    #[test]
    fn conditions_hold_for_builtins() {
        for name in ["pow_mean,alpha=2", "pow_norm,alpha=1.5", "pow_Ek:2,alpha=3", "pow_gauss,alpha=1.5"] {
            for n in [2, 3] {
                let r = check_conditions(&spec(name), n, 2000, 1);
                assert!(r.passed(), "{name} n={n}: {:?}", r.violations.first());
                assert!(r.max_gradient_error < 1e-5);
            }
        }
    }

    #[derive(Debug)]
    struct Broken;

    // H²(1 − 5‖Å‖²/H²): decreasing in the smallest curvature when pinched
    impl Speed for Broken {
        fn name(&self) -> String {
            "broken".into()
        }
        fn alpha(&self) -> f64 {
            2.0
        }
        fn value(&self, k: &[f64]) -> f64 {
            let h: f64 = k.iter().sum();
            let a2: f64 = k.iter().map(|x| (x - h / k.len() as f64).powi(2)).sum();
            h * h - 5.0 * a2
        }
        fn gradient(&self, k: &[f64]) -> Vec<f64> {
            let h: f64 = k.iter().sum();
            let n = k.len() as f64;
            k.iter().map(|x| 2.0 * h - 10.0 * (x - h / n)).collect()
        }
        fn hessian(&self, k: &[f64]) -> Vec<Vec<f64>> {
            let n = k.len();
            (0..n)
                .map(|i| (0..n).map(|j| 2.0 - 10.0 * ((i == j) as u8 as f64 - 1.0 / n as f64)).collect())
                .collect()
        }
    }

    #[test]
    fn broken_speed_reports_monotonicity_witness() {
        let s = SpeedSpec::new(Arc::new(Broken), None).unwrap();
        let r = check_conditions(&s, 2, 4000, 2);
        let v = r
            .violations
            .iter()
            .find(|v| v.condition == Condition::Monotonicity)
            .expect("monotonicity violation");
        let g = Broken.gradient(&v.kappa);
        assert!(g.iter().any(|x| *x <= 0.0));
    }

    #[test]
    fn mu_for_squared_mean_curvature() {
        // F̈[B, B] = 2 (tr B)² ≤ 2n
        let mu = estimate_mu(&spec("pow_mean"), 2, 20000, 3).mu;
        assert!(mu <= 4.0 + 1e-6 && mu > 3.9, "{mu}");
    }

    #[test]
    fn second_variation_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for name in ["pow_mean,alpha=3", "pow_norm,alpha=1.5", "pow_Ek:2,alpha=2", "pow_gauss,alpha=3"] {
            let s = spec(name);
            for n in [2, 3] {
                // umbilic point with traceless diagonal B
                let k = vec![1.0 / n as f64; n];
                let xi = traceless_unit(&mut rng, n);
                let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(xi));
                let a = second_variation_analytic(s.speed().as_ref(), &k, &b);
                let fd = second_variation_fd(s.speed().as_ref(), &k, &b);
                assert!((a - fd).abs() < 1e-6 * a.abs().max(1.0), "{name} {a} {fd}");
                // generic point, full B
                let k = sample_pinched(&mut rng, n, 1.0, 0.5);
                let b = random_symmetric_unit(&mut rng, n);
                let a = second_variation_analytic(s.speed().as_ref(), &k, &b);
                let fd = second_variation_fd(s.speed().as_ref(), &k, &b);
                assert!((a - fd).abs() < 1e-6 * a.abs().max(1.0), "{name} {a} {fd}");
            }
        }
    }

    #[test]
    fn derivative_bounds() {
        let s = spec("pow_mean");
        let sphere = verify_derivative_bounds(&s, 2, 0.0, 10, 0);
        assert_eq!(sphere.derivative_violations, 0);
        let s = spec("pow_norm,alpha=2");
        let mu = estimate_mu(&s, 2, 10000, 5).mu;
        let r = verify_derivative_bounds(&s, 2, mu, 10000, 6);
        assert!(r.passed(), "{r:?}");
        // the narrower band with μ/(2α) excludes F = H² + 2‖Å‖²
        assert!(r.narrow_value_violations > 0);
        let r = verify_derivative_bounds(&s, 2, 0.5 * mu, 2000, 6);
        assert!(!r.passed() && r.worst_witness.is_some());
    }

    #[test]
    fn umbilic_point_is_tight() {
        for name in ["pow_mean,alpha=3", "pow_Ek:2,alpha=1.5", "pow_norm,alpha=2"] {
            let s = spec(name);
            let c = 0.7;
            let g = s.gradient(&[c, c, c]);
            let h = 3.0 * c;
            for gi in g {
                assert!((gi - s.alpha() * h.powf(s.alpha() - 1.0)).abs() < 1e-12);
            }
            assert!((s.value(&[c, c, c]) - h.powf(s.alpha())).abs() < 1e-12);
        }
    }
}
