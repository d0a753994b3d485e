//! Small statistics helpers: moments, Kolmogorov-Smirnov distances and
//! p-values.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Sup distance between the empirical CDF of `xs` and a CDF.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s: Vec<f64> = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        // group ties so jumps of a discrete sample are handled correctly
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let f = cdf(s[i]);
        let below = i as f64 / n;
        let upto = (j + 1) as f64 / n;
        best = best.max((f - below).abs()).max((upto - f).abs());
        i = j + 1;
    }
    best
}

/// KS distance to `N(0, σ²)`; `σ = 0` is the point mass at zero.
pub fn ks_normal(xs: &[f64], sigma: f64) -> f64 {
    if sigma <= 0.0 {
        // sup |F_n − 1{x ≥ 0}| is the larger of the mass below and above 0
        let n = xs.len() as f64;
        let below = xs.iter().filter(|&&x| x < 0.0).count() as f64;
        let above = xs.iter().filter(|&&x| x > 0.0).count() as f64;
        return below.max(above) / n;
    }
    let nd = Normal::new(0.0, sigma).unwrap();
    ks_distance(xs, |x| nd.cdf(x))
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Asymptotic p-value of a KS statistic with effective sample size `ne`.
pub fn ks_pvalue(stat: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    let lam = (sq + 0.12 + 0.11 / sq) * stat;
    if lam < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lam * lam).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Pearson χ² uniformity test over `counts`; returns the p-value.
pub fn chi2_uniform_pvalue(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_basics() {
        assert!((ks_normal(&[0.0; 10], 0.0)).abs() < 1e-15);
        assert!((ks_normal(&[0.0; 10], 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!(ks_pvalue(0.001, 1e4) > 0.99);
        assert!(ks_pvalue(0.1, 1e4) < 1e-10);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!(chi2_uniform_pvalue(&[100, 100, 100]) > 0.99);
    }
}
