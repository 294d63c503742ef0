//! Small numeric helpers: exact binomial tail sums, nearest-rank
//! percentiles, Monte Carlo standard errors.

/// `P(Bin(n, p) ≤ k)` by direct summation of the probability mass function.
///
/// Terms are accumulated in log space, so `(1 − p)^n` underflowing to zero
/// for large `n` does not lose the tail.
pub fn binomial_cdf(n: u64, p: f64, k: i64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if k >= n {
        return 1.0;
    }
    if p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mut log_pmf = Vec::with_capacity(k as usize + 1);
    let mut current = n as f64 * (-p).ln_1p();
    log_pmf.push(current);
    for i in 0..k {
        current += ((n - i) as f64 / (i + 1) as f64).ln() + log_odds;
        log_pmf.push(current);
    }
    let peak = log_pmf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_pmf.iter().map(|&l| (l - peak).exp()).sum();
    (peak.exp() * total).min(1.0)
}

/// Nearest-rank percentile: the `⌈P/100 · N⌉`-th smallest value (1-based,
/// at least the first). `percentile` must lie in `(0, 100]`.
pub fn nearest_rank(values: &[f64], percentile: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    assert!(
        percentile > 0.0 && percentile <= 100.0,
        "percentile {percentile} outside (0, 100]"
    );
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean, using the unbiased sample variance.
/// Zero for fewer than two values.
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}
