//! Gauss–Legendre quadrature and fully normalized associated Legendre
//! functions with colatitude derivatives up to third order.

use std::f64::consts::PI;

/// Gauss–Legendre nodes `x_j = cos θ_j` and weights on [-1, 1], ordered by
/// increasing colatitude (decreasing `x`).
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[count - 1 - i] = -x;
        weights[count - 1 - i] = w;
    }
    if count % 2 == 1 {
        nodes[count / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Index into a triangular `(l, m)` table with `0 <= m <= l`.
#[inline]
pub fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Values of the orthonormal associated Legendre functions `P̄_l^m(cos θ)`
/// and their first three θ-derivatives at one colatitude.
///
/// Normalization: `2π ∫ (P̄_l^m)² d(cos θ) = 1`, no Condon–Shortley phase.
#[derive(Debug, Clone)]
pub struct LegendreColumn {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub d2p: Vec<f64>,
    pub d3p: Vec<f64>,
}

/// Square-root coefficients of the normalized recurrences for one degree,
/// so that pointwise evaluation does no transcendental work per `(l, m)`.
#[derive(Debug, Clone)]
pub struct Recurrence {
    degree: usize,
    diag: Vec<f64>,
    sub: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    lower: Vec<f64>,
}

impl Recurrence {
    pub fn new(degree: usize) -> Self {
        let len = tri(degree, degree) + 1;
        let (mut a, mut b, mut lower) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut diag = vec![0.0; degree + 1];
        let mut sub = vec![0.0; degree + 1];
        for m in 0..=degree {
            let mf = m as f64;
            if m > 0 {
                diag[m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
            }
            sub[m] = (2.0 * mf + 3.0).sqrt();
            for l in m..=degree {
                let lf = l as f64;
                let k = tri(l, m);
                if l >= m + 2 {
                    a[k] = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                    b[k] = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                }
                if l > m {
                    lower[k] = ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt();
                }
            }
        }
        Self { degree, diag, sub, a, b, lower }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    /// `P̄_l^m(cos θ)` into `p`; valid at the poles.
    pub fn values_into(&self, theta: f64, p: &mut [f64]) {
        let (x, sn) = (theta.cos(), theta.sin());
        p[0] = (1.0 / (4.0 * PI)).sqrt();
        for m in 0..=self.degree {
            if m > 0 {
                p[tri(m, m)] = self.diag[m] * sn * p[tri(m - 1, m - 1)];
            }
            if m < self.degree {
                p[tri(m + 1, m)] = self.sub[m] * x * p[tri(m, m)];
            }
            for l in (m + 2)..=self.degree {
                let k = tri(l, m);
                p[k] = self.a[k] * (x * p[k - l] - self.b[k] * p[k - l - (l - 1)]);
            }
        }
    }

    /// First two θ-derivatives from the values; requires `sin θ ≠ 0`.
    pub fn derivatives_into(&self, theta: f64, p: &[f64], dp: &mut [f64], d2p: &mut [f64]) {
        let (x, sn) = (theta.cos(), theta.sin());
        let cot = x / sn;
        let csc2 = 1.0 / (sn * sn);
        for l in 0..=self.degree {
            let lf = l as f64;
            for m in 0..=l {
                let mf = m as f64;
                let k = tri(l, m);
                let lower = if l > m { self.lower[k] * p[k - l] } else { 0.0 };
                let d1 = (lf * x * p[k] - lower) / sn;
                dp[k] = d1;
                d2p[k] = -cot * d1 - (lf * (lf + 1.0) - mf * mf * csc2) * p[k];
            }
        }
    }
}

impl LegendreColumn {
    /// Values only; valid at any colatitude including the poles.
    pub fn values(degree: usize, theta: f64) -> Vec<f64> {
        let rec = Recurrence::new(degree);
        let mut p = vec![0.0; rec.len()];
        rec.values_into(theta, &mut p);
        p
    }

    /// Values and derivatives; requires `sin θ` bounded away from zero.
    pub fn new(degree: usize, theta: f64) -> Self {
        let rec = Recurrence::new(degree);
        let len = rec.len();
        let mut p = vec![0.0; len];
        rec.values_into(theta, &mut p);
        let (mut dp, mut d2p, mut d3p) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        rec.derivatives_into(theta, &p, &mut dp, &mut d2p);
        let (x, sn) = (theta.cos(), theta.sin());
        let cot = x / sn;
        let csc2 = 1.0 / (sn * sn);
        for l in 0..=degree {
            let lf = l as f64;
            for m in 0..=l {
                let mf = m as f64;
                let k = tri(l, m);
                let q = lf * (lf + 1.0) - mf * mf * csc2;
                // derivative of the Legendre ODE
                d3p[k] = csc2 * dp[k] - cot * d2p[k] - q * dp[k] - 2.0 * mf * mf * csc2 * cot * p[k];
            }
        }
        Self { p, dp, d2p, d3p }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(9);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // exact up to degree 17
        let i16: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(16)).sum();
        assert!((i16 - 2.0 / 17.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn low_degree_closed_forms() {
        let theta = 0.7_f64;
        let c = LegendreColumn::new(3, theta);
        let y10 = (3.0 / (4.0 * PI)).sqrt();
        assert!((c.p[tri(1, 0)] - y10 * theta.cos()).abs() < 1e-14);
        assert!((c.dp[tri(1, 0)] + y10 * theta.sin()).abs() < 1e-14);
        assert!((c.d2p[tri(1, 0)] + y10 * theta.cos()).abs() < 1e-14);
        assert!((c.d3p[tri(1, 0)] - y10 * theta.sin()).abs() < 1e-14);
        // P̄_1^1 = sqrt(3/8π) sin θ
        let y11 = (3.0 / (8.0 * PI)).sqrt();
        assert!((c.p[tri(1, 1)] - y11 * theta.sin()).abs() < 1e-14);
        assert!((c.dp[tri(1, 1)] - y11 * theta.cos()).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let l = 12;
        let t = 1.1;
        let h = 1e-5;
        let c = LegendreColumn::new(l, t);
        let cp = LegendreColumn::new(l, t + h);
        let cm = LegendreColumn::new(l, t - h);
        for k in 0..c.p.len() {
            let fd1 = (cp.p[k] - cm.p[k]) / (2.0 * h);
            let fd2 = (cp.dp[k] - cm.dp[k]) / (2.0 * h);
            let fd3 = (cp.d2p[k] - cm.d2p[k]) / (2.0 * h);
            assert!((fd1 - c.dp[k]).abs() < 1e-7, "d1 {k}");
            assert!((fd2 - c.d2p[k]).abs() < 1e-6, "d2 {k}");
            assert!((fd3 - c.d3p[k]).abs() < 1e-5, "d3 {k}");
        }
    }
}
