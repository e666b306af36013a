//! Elementary symmetric polynomials and binomial coefficients.

/// `[σ_0, σ_1, …, σ_n]` of `x`.
pub fn elementary(x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; x.len() + 1];
    e[0] = 1.0;
    for (i, &xi) in x.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += xi * e[k - 1];
        }
    }
    e
}

/// `σ_k` of `x` with entry `skip` removed.
pub fn elementary_without(x: &[f64], k: usize, skip: &[usize]) -> f64 {
    let rest: Vec<f64> = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, v)| *v)
        .collect();
    if k > rest.len() {
        return 0.0;
    }
    elementary(&rest)[k]
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Normalized `E_k = σ_k / binom(n, k)`, so that `E_k(1,…,1) = 1`.
pub fn normalized(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    elementary(x)
        .into_iter()
        .enumerate()
        .map(|(k, s)| s / binomial(n, k))
        .collect()
}
