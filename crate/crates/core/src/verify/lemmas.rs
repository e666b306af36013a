//! Monte-Carlo suites for the pointwise algebra of principal curvatures.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::speeds::{cone_rho, par_samples, sample_pinched};
use crate::symmetric::normalized;

/// Relative margin below which a sample counts as a violation.
pub const LEMMA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub n: usize,
    pub samples: usize,
    pub violations: usize,
    /// Smallest normalised margin seen.
    pub worst_margin: f64,
    pub worst_witness: Vec<f64>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn pinching_of(kappa: &[f64]) -> (f64, f64, f64) {
    let n = kappa.len() as f64;
    let h: f64 = kappa.iter().sum();
    let a2: f64 = kappa.iter().map(|k| k * k).sum();
    let tl: f64 = kappa.iter().map(|k| (k - h / n).powi(2)).sum();
    (h, a2, tl / (h * h))
}

/// Draw from the pinching cone `‖Å‖² < H²/(n(n−1))`. Every eighth sample
/// sits on the boundary of a random sub-cone so the bounds are saturated.
fn draw(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let h = 10f64.powf(rng.random_range(-2.0..2.0));
    let cap = 1.0 / (n * (n - 1)) as f64;
    if rng.random_range(0..8) == 0 {
        let delta = cap * rng.random_range(0.0..1.0f64);
        let xi = crate::speeds::traceless_unit(rng, n);
        let rho = cone_rho(n, delta);
        xi.iter().map(|x| h / n as f64 * (1.0 + rho * x)).collect()
    } else {
        sample_pinched(rng, n, h, cone_rho(n, cap))
    }
}

fn run_suite(name: &str, n: usize, samples: usize, seed: u64, margin: impl Fn(&[f64]) -> f64 + Sync) -> Result<LemmaReport> {
    if n < 2 {
        return Err(Error::Precondition(format!("{name} needs n >= 2, got {n}")));
    }
    let results = par_samples(samples, seed, |rng| {
        let k = draw(rng, n);
        (margin(&k), k)
    });
    let mut report = LemmaReport {
        lemma: name.into(),
        n,
        samples,
        violations: 0,
        worst_margin: f64::INFINITY,
        worst_witness: Vec::new(),
    };
    for (m, k) in results {
        if !(m >= -LEMMA_TOLERANCE) {
            report.violations += 1;
        }
        if !(m >= report.worst_margin) {
            report.worst_margin = m;
            report.worst_witness = k;
        }
    }
    Ok(report)
}

/// Bounds `(1 ∓ √(n(n−1)ε)) H/n` with `ε = ‖Å‖²/H²`.
pub fn pinch_bounds(kappa: &[f64]) -> (f64, f64) {
    let n = kappa.len() as f64;
    let (h, _, eps) = pinching_of(kappa);
    let root = (n * (n - 1.0) * eps).sqrt();
    ((1.0 - root) * h / n, (1.0 + root) * h / n)
}

/// Smallest margin of the pinching bounds at `kappa`, in units of `H/n`.
/// The quadratic `z² − 2z + (1 − n(n−1)ε)` at `z = nκ_i/H` must be
/// non-positive as well; the worse of the two routes is reported.
pub fn pinch_margin(kappa: &[f64]) -> f64 {
    let n = kappa.len() as f64;
    let (h, _, eps) = pinching_of(kappa);
    let (lo, hi) = pinch_bounds(kappa);
    let unit = h / n;
    let c = 1.0 - n * (n - 1.0) * eps;
    kappa
        .iter()
        .map(|&k| {
            let z = k / unit;
            let bound = ((k - lo) / unit).min((hi - k) / unit).min(z);
            let quad = -(z * z - 2.0 * z + c);
            bound.min(quad)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn lemma_pinch_suite(n: usize, samples: usize, seed: u64) -> Result<LemmaReport> {
    run_suite("pinch", n, samples, seed, pinch_margin)
}

/// `nC − (1+nε)H‖A‖² − ε(1+nε)(1−√(n(n−1)ε))H³`, in units of `H³`.
pub fn cest_margin(kappa: &[f64]) -> f64 {
    let n = kappa.len() as f64;
    let (h, a2, eps) = pinching_of(kappa);
    let c: f64 = kappa.iter().map(|k| k * k * k).sum();
    let lhs = n * c - (1.0 + n * eps) * h * a2;
    let rhs = eps * (1.0 + n * eps) * (1.0 - (n * (n - 1.0) * eps).sqrt()) * h.powi(3);
    (lhs - rhs) / h.powi(3)
}

pub fn lemma_cest_suite(n: usize, samples: usize, seed: u64) -> Result<LemmaReport> {
    run_suite("cest", n, samples, seed, cest_margin)
}

/// Agreement of `‖A‖² − H²/n`, `(1/n)Σ_{i<j}(κ_i−κ_j)²` and `Σ(κ_i − H/n)²`,
/// as minus the largest discrepancy in units of `‖A‖²`.
pub fn traceless_margin(kappa: &[f64]) -> f64 {
    let n = kappa.len();
    let h: f64 = kappa.iter().sum();
    let a2: f64 = kappa.iter().map(|k| k * k).sum();
    let first = a2 - h * h / n as f64;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            pairs += (kappa[i] - kappa[j]).powi(2);
        }
    }
    let second = pairs / n as f64;
    let third: f64 = kappa.iter().map(|k| (k - h / n as f64).powi(2)).sum();
    let gap = (first - second).abs().max((first - third).abs()).max((second - third).abs());
    -gap / a2
}

pub fn traceless_suite(n: usize, samples: usize, seed: u64) -> Result<LemmaReport> {
    run_suite("traceless", n, samples, seed, traceless_margin)
}

/// Smallest step of `E_1 ≥ E_2^{1/2} ≥ … ≥ E_n^{1/n}`, in units of `E_1`.
pub fn maclaurin_margin(kappa: &[f64]) -> f64 {
    let e = normalized(kappa);
    let roots: Vec<f64> = (1..e.len()).map(|k| e[k].powf(1.0 / k as f64)).collect();
    roots.windows(2).map(|w| (w[0] - w[1]) / e[1]).fold(f64::INFINITY, f64::min)
}

pub fn maclaurin_suite(n: usize, samples: usize, seed: u64) -> Result<LemmaReport> {
    run_suite("maclaurin", n, samples, seed, maclaurin_margin)
}

/// All four suites for one `n`.
pub fn all_suites(n: usize, samples: usize, seed: u64) -> Result<Vec<LemmaReport>> {
    Ok(vec![
        lemma_pinch_suite(n, samples, seed)?,
        lemma_cest_suite(n, samples, seed.wrapping_add(1))?,
        traceless_suite(n, samples, seed.wrapping_add(2))?,
        maclaurin_suite(n, samples, seed.wrapping_add(3))?,
    ])
}
