//! Randomized grid discretization `t_{σ,a}` onto `{r/a : |r| ≤ a²}`.
//!
//! `t_{0,a}` clamps to `[−a, a]` and rounds to one of the two neighboring
//! grid points with linear-interpolation probabilities, so it is unbiased
//! inside the range. `t_{σ,a}(x) = t_{0,a}(x + σN)`.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{knn_entropy, plug_in_entropy, EntropyEstimate, DEFAULT_K};
use crate::error::{invalid, Result};
use crate::rng;
use crate::stats::normal_pdf;

/// Largest joint alphabet the plug-in estimator will histogram.
pub const MAX_ALPHABET: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationParams {
    pub sigma: f64,
    pub a: u32,
}

impl DiscretizationParams {
    pub fn new(sigma: f64, a: u32) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return invalid("discretization noise must be finite and non-negative");
        }
        if a == 0 || a > 2048 {
            return invalid("grid parameter a must be in 1..=2048");
        }
        Ok(DiscretizationParams { sigma, a })
    }

    /// Number of grid points, `2a² + 1`.
    pub fn support(&self) -> usize {
        2 * (self.a as usize).pow(2) + 1
    }

    fn half(&self) -> i64 {
        (self.a as i64).pow(2)
    }

    pub fn value_of(&self, index: usize) -> f64 {
        (index as i64 - self.half()) as f64 / self.a as f64
    }
}

/// Grid index in `0..2a²+1` of `t_{σ,a}(x)`.
pub fn discretize_index<R: Rng + ?Sized>(x: f64, dp: &DiscretizationParams, rng: &mut R) -> usize {
    let y = if dp.sigma > 0.0 { x + dp.sigma * rng.sample::<f64, _>(StandardNormal) } else { x };
    let half = dp.half();
    let u = y * dp.a as f64;
    let r = if u >= half as f64 {
        half
    } else if u <= -half as f64 {
        -half
    } else {
        let fl = u.floor();
        // ⌊u⌋ with probability 1 + ⌊u⌋ − u, otherwise ⌊u⌋ + 1
        if rng.random::<f64>() < 1.0 + fl - u { fl as i64 } else { fl as i64 + 1 }
    };
    (r + half) as usize
}

pub fn discretize_t<R: Rng + ?Sized>(x: f64, dp: &DiscretizationParams, rng: &mut R) -> f64 {
    dp.value_of(discretize_index(x, dp, rng))
}

/// `P(Z ∈ [lo, hi])` for standard normal `Z`, accurate in both tails.
fn normal_mass(lo: f64, hi: f64) -> f64 {
    let q = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    if lo >= 0.0 {
        q(lo) - q(hi)
    } else if hi <= 0.0 {
        q(-hi) - q(-lo)
    } else {
        1.0 - q(-lo) - q(hi)
    }
}

/// Exact law of `t_{σ,a}(x)` as a probability vector over grid indices.
pub fn t_pmf(x: f64, dp: &DiscretizationParams) -> Vec<f64> {
    let half = dp.half();
    let n = dp.support();
    let mut p = vec![0.0; n];
    let mu = x * dp.a as f64;
    let s = dp.sigma * dp.a as f64;
    if s == 0.0 {
        let r = if mu >= half as f64 {
            (half, 1.0)
        } else if mu <= -half as f64 {
            (-half, 1.0)
        } else {
            let fl = mu.floor();
            (fl as i64, 1.0 + fl - mu)
        };
        p[(r.0 + half) as usize] += r.1;
        if r.1 < 1.0 {
            p[(r.0 + 1 + half) as usize] += 1.0 - r.1;
        }
        return p;
    }
    // in u = a·y coordinates, u ~ N(μ, s²). On [α, β]:
    // ∫ φ = I0, ∫ (u − c) φ = (μ − c) I0 − s (φ(zβ) − φ(zα))
    let z = |u: f64| (u - mu) / s;
    let i0 = |lo: f64, hi: f64| normal_mass(z(lo), z(hi));
    let i1 = |lo: f64, hi: f64, c: f64| (mu - c) * i0(lo, hi) - s * (normal_pdf(z(hi)) - normal_pdf(z(lo)));
    let window = 12.0 * s + 2.0;
    let lo_r = ((mu - window).floor() as i64).max(-half);
    let hi_r = ((mu + window).ceil() as i64).min(half);
    for r in lo_r..=hi_r {
        let rf = r as f64;
        let mut m = 0.0;
        if r > -half {
            // rising edge on [r−1, r]: weight u − (r − 1)
            m += i1(rf - 1.0, rf, rf - 1.0);
        } else {
            m += normal_mass(f64::NEG_INFINITY, z(rf));
        }
        if r < half {
            m -= i1(rf, rf + 1.0, rf + 1.0);
        } else {
            m += normal_mass(z(rf), f64::INFINITY);
        }
        p[(r + half) as usize] = m.max(0.0);
    }
    p
}

pub fn pmf_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&q| q > 0.0).map(|q| -q * q.ln()).sum()
}

/// `ℍ(t_{σ,a}(x))` for a fixed `x`.
pub fn per_value_entropy(x: f64, dp: &DiscretizationParams) -> f64 {
    pmf_entropy(&t_pmf(x, dp))
}

/// Where the discretized samples of the ladder come from.
pub enum LadderSource<'a> {
    /// `X ~ N(0, var)` in one dimension; the discretized law is computed
    /// exactly as well as sampled.
    Gaussian { var: f64, samples: usize },
    /// Given draws of `X` in n-space.
    Samples(&'a [Vec<f64>]),
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderRow {
    pub a: u32,
    pub plug_in: EntropyEstimate,
    pub exact: Option<f64>,
    /// `ℍ − n log a`, from the exact law when available.
    pub scaled: f64,
    pub target: EntropyEstimate,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FinombecslesReport {
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
    pub rows: Vec<LadderRow>,
    pub gaps_decreasing: bool,
}

fn joint_entropy(xs: &[Vec<f64>], dp: &DiscretizationParams, seed: u64) -> Result<EntropyEstimate> {
    let base = dp.support() as u64;
    let keys: Vec<u64> = rng::chunks(xs.len(), 4096)
        .into_par_iter()
        .flat_map_iter(|(start, len)| {
            let mut r = rng::stream(seed, (start / 4096) as u64);
            xs[start..start + len]
                .iter()
                .map(|x| x.iter().fold(0u64, |k, &v| k * base + discretize_index(v, dp, &mut r) as u64))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut hist: HashMap<u64, u64> = HashMap::new();
    for k in keys {
        *hist.entry(k).or_default() += 1;
    }
    plug_in_entropy(&hist.into_values().collect::<Vec<_>>())
}

/// `ℍ(tⁿ_{σ,a}(X)) − n log a` along a ladder of `a`, against `𝔻(X + σM)`.
pub fn check_finombecsles(source: LadderSource<'_>, sigma: f64, ladder: &[u32], seed: u64) -> Result<FinombecslesReport> {
    if ladder.is_empty() {
        return invalid("empty ladder");
    }
    let owned;
    let (xs, dim): (&[Vec<f64>], usize) = match &source {
        LadderSource::Gaussian { var, samples } => {
            if !(*var >= 0.0) || *samples == 0 {
                return invalid("Gaussian source needs var ≥ 0 and a positive sample count");
            }
            let sd = var.sqrt();
            owned = rng::chunks(*samples, 4096)
                .into_par_iter()
                .flat_map_iter(|(start, len)| {
                    let mut r = rng::stream(seed ^ 0x51ab, (start / 4096) as u64);
                    (0..len).map(move |_| vec![sd * r.sample::<f64, _>(StandardNormal)]).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>();
            (&owned, 1)
        }
        LadderSource::Samples(s) => {
            if s.is_empty() || s[0].is_empty() || s.iter().any(|v| v.len() != s[0].len()) {
                return invalid("samples must be non-empty and of equal dimension");
            }
            (s, s[0].len())
        }
    };
    for &a in ladder {
        let dp = DiscretizationParams::new(sigma, a)?;
        if (dp.support() as f64).powi(dim as i32) > MAX_ALPHABET {
            return invalid(format!(
                "alphabet (2a²+1)^n = {}^{dim} exceeds {MAX_ALPHABET:e} bins",
                dp.support()
            ));
        }
    }
    let target = match &source {
        LadderSource::Gaussian { var, .. } => {
            EntropyEstimate::exact(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * (var + sigma * sigma)).ln())
        }
        LadderSource::Samples(s) => {
            let mut r = rng::stream(seed ^ 0x7e2d, u64::MAX);
            let noisy: Vec<Vec<f64>> = s
                .iter()
                .map(|x| x.iter().map(|v| v + sigma * r.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            knn_entropy(&noisy, DEFAULT_K)?
        }
    };
    let mut rows = Vec::new();
    for (i, &a) in ladder.iter().enumerate() {
        let dp = DiscretizationParams::new(sigma, a)?;
        let plug_in = joint_entropy(xs, &dp, seed.wrapping_add(i as u64 + 1))?;
        let exact = match &source {
            LadderSource::Gaussian { var, .. } => {
                let joint = DiscretizationParams::new((var + sigma * sigma).sqrt(), a)?;
                Some(pmf_entropy(&t_pmf(0.0, &joint)))
            }
            LadderSource::Samples(_) => None,
        };
        let scaled = exact.unwrap_or(plug_in.value) - dim as f64 * (a as f64).ln();
        rows.push(LadderRow { a, plug_in, exact, scaled, target, gap: (scaled - target.value).abs() });
    }
    let gaps_decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(FinombecslesReport { dim, sigma, seed, rows, gaps_decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn on_grid_and_clamped() {
        let dp = DiscretizationParams::new(0.0, 2).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(discretize_t(1.5, &dp, &mut r), 1.5);
            assert_eq!(discretize_t(7.0, &dp, &mut r), 2.0);
            assert_eq!(discretize_t(-7.0, &dp, &mut r), -2.0);
        }
        assert_eq!(dp.support(), 9);
    }

    #[test]
    fn unbiased_rounding() {
        let dp = DiscretizationParams::new(0.0, 2).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..1_000_000).map(|_| discretize_t(0.3, &dp, &mut r)).collect();
        let (m, se) = crate::stats::mean_stderr(&xs);
        assert!((m - 0.3).abs() < 4.0 * se);
    }

    #[test]
    fn pmf_sums_to_one_and_matches_sampling() {
        for &(x, s, a) in &[(0.3, 0.0, 2), (0.3, 0.5, 2), (1.9, 0.7, 2), (-5.0, 1.0, 3), (0.0, 2.0, 16)] {
            let dp = DiscretizationParams::new(s, a).unwrap();
            let p = t_pmf(x, &dp);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{x} {s} {a}");
        }
        let dp = DiscretizationParams::new(0.5, 2).unwrap();
        let p = t_pmf(0.8, &dp);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let mut c = vec![0u64; dp.support()];
        for _ in 0..n {
            c[discretize_index(0.8, &dp, &mut r)] += 1;
        }
        for (i, &ci) in c.iter().enumerate() {
            let f = ci as f64 / n as f64;
            let se = (p[i] * (1.0 - p[i]) / n as f64).sqrt();
            assert!((f - p[i]).abs() < 5.0 * se + 1e-9, "bin {i}: {f} vs {}", p[i]);
        }
    }

    #[test]
    fn point_mass_target_and_guard() {
        let rep = check_finombecsles(LadderSource::Gaussian { var: 0.0, samples: 1000 }, 1.0, &[4], 1).unwrap();
        let e = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((rep.rows[0].target.value - e).abs() < 1e-15);
        let pts = vec![vec![0.0, 0.0]; 10];
        assert!(check_finombecsles(LadderSource::Samples(&pts), 1.0, &[64], 1).is_err());
    }
}
