//! Random covering lifts of graph vectors to tree balls, local statistics
//! against the Gaussian wave, and the empirical star/edge entropy inequality.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::discretize::{discretize_index, t_pmf, pmf_entropy, DiscretizationParams, MAX_ALPHABET};
use crate::entropy::{plug_in_entropy, EntropyEstimate};
use crate::error::{invalid, Result};
use crate::graph::RegularGraph;
use crate::rng;
use crate::stats::{ks_normal, mean_stderr};
use crate::tree_ball::{BallIndex, BallKind};
use crate::wave::{covariance_matrix, WaveParams};

const LIFT_CHUNK: usize = 4096;

/// A locally bijective map from ball vertices into the graph.
#[derive(Clone, Debug)]
pub struct LiftSample<'a> {
    pub ball: &'a BallIndex,
    pub image: Vec<usize>,
}

impl LiftSample<'_> {
    /// Every interior ball vertex sees each graph neighbor of its image
    /// exactly once among the images of its ball neighbors.
    pub fn is_locally_bijective(&self, g: &RegularGraph) -> bool {
        self.ball.interior().all(|v| {
            let mut a: Vec<usize> = self.ball.adjacency[v].iter().map(|&u| self.image[u]).collect();
            let mut b = g.neighbors(self.image[v]).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        })
    }
}

fn check_degree(g: &RegularGraph, ball: &BallIndex) -> Result<()> {
    if g.d() != ball.d {
        return invalid(format!("graph degree {} differs from ball degree {}", g.d(), ball.d));
    }
    Ok(())
}

fn lift_into<R: Rng + ?Sized>(g: &RegularGraph, ball: &BallIndex, rng: &mut R, image: &mut [usize], scratch: &mut Vec<usize>) {
    image[0] = rng.random_range(0..g.n());
    if ball.kind == BallKind::Edge {
        let nb = g.neighbors(image[0]);
        image[1] = nb[rng.random_range(0..nb.len())];
    }
    for v in 0..ball.len() {
        let ch = &ball.children[v];
        if ch.is_empty() {
            continue;
        }
        let iv = image[v];
        scratch.clear();
        // the non-child ball neighbors are already mapped
        scratch.extend(
            g.neighbors(iv)
                .iter()
                .copied()
                .filter(|&w| !ball.adjacency[v].iter().any(|&u| !ch.contains(&u) && image[u] == w)),
        );
        scratch.shuffle(rng);
        for (c, &w) in ch.iter().zip(scratch.iter()) {
            image[*c] = w;
        }
    }
}

pub fn sample_lift<'a, R: Rng + ?Sized>(g: &RegularGraph, ball: &'a BallIndex, rng: &mut R) -> Result<LiftSample<'a>> {
    check_degree(g, ball)?;
    let mut image = vec![0; ball.len()];
    lift_into(g, ball, rng, &mut image, &mut Vec::with_capacity(g.d()));
    Ok(LiftSample { ball, image })
}

/// `u ↦ scale·v(image(u))`.
pub fn lift_pullback(v: &[f64], lift: &LiftSample<'_>, scale: f64) -> Vec<f64> {
    lift.image.iter().map(|&i| scale * v[i]).collect()
}

/// `m` pulled-back samples `√n·v∘φ`, drawn in parallel streams.
pub fn lifted_samples<R: Rng + ?Sized>(
    g: &RegularGraph,
    v: &[f64],
    ball: &BallIndex,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_degree(g, ball)?;
    if v.len() != g.n() {
        return invalid("vector length differs from the vertex count");
    }
    let seed = rng::fork(rng);
    let scale = (g.n() as f64).sqrt();
    Ok(rng::chunks(m, LIFT_CHUNK)
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(ci, (_, len))| {
            let mut r = rng::stream(seed, ci as u64);
            let mut image = vec![0; ball.len()];
            let mut scratch = Vec::with_capacity(g.d());
            (0..len)
                .map(|_| {
                    lift_into(g, ball, &mut r, &mut image, &mut scratch);
                    image.iter().map(|&i| scale * v[i]).collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Empirical covariance `E[x_i x_j]` over samples with per-entry standard
/// errors.
pub fn second_moments(samples: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = samples.first().map_or(0, |s| s.len());
    let m = samples.len() as f64;
    let mut s1: DMatrix<f64> = DMatrix::zeros(k, k);
    let mut s2: DMatrix<f64> = DMatrix::zeros(k, k);
    for s in samples {
        for i in 0..k {
            for j in 0..=i {
                let p = s[i] * s[j];
                s1[(i, j)] += p;
                s2[(i, j)] += p * p;
            }
        }
    }
    let mut mean = DMatrix::zeros(k, k);
    let mut se = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let mu = s1[(i, j)] / m;
            let var = (s2[(i, j)] / m - mu * mu).max(0.0) * m / (m - 1.0).max(1.0);
            mean[(i, j)] = mu;
            mean[(j, i)] = mu;
            se[(i, j)] = (var / m).sqrt();
            se[(j, i)] = se[(i, j)];
        }
    }
    (mean, se)
}

/// Grid for the σ̂ refinement.
pub const SIGMA_GRID_STEP: f64 = 0.005;
pub const SIGMA_MAX: f64 = 1.2;

#[derive(Clone, Debug, Serialize)]
pub struct SigmaFit {
    /// `√min(1, mean of x²)`.
    pub sigma_moment: f64,
    pub ks_moment: f64,
    /// Grid point minimizing the KS distance.
    pub sigma_ks: f64,
    pub ks_min: f64,
    pub sigma_hat: f64,
    pub ks: f64,
}

/// σ̂ starts at the moment estimate and moves to the KS-optimal grid point
/// only when that improves the KS distance by more than the 5% critical
/// value `1.36/√n`.
pub fn fit_sigma(xs: &[f64]) -> SigmaFit {
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let sigma_moment = m2.min(1.0).sqrt();
    let ks_moment = ks_normal(xs, sigma_moment);
    let steps = (SIGMA_MAX / SIGMA_GRID_STEP).round() as usize;
    let (sigma_ks, ks_min) = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let s = i as f64 * SIGMA_GRID_STEP;
            (s, ks_normal(xs, s))
        })
        .reduce(|| (f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    let (sigma_hat, ks) = if ks_moment - ks_min > 1.36 / n.sqrt() { (sigma_ks, ks_min) } else { (sigma_moment, ks_moment) };
    SigmaFit { sigma_moment, ks_moment, sigma_ks, ks_min, sigma_hat, ks }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalStatsReport {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub ball_kind: BallKind,
    pub ball_k: usize,
    pub samples: usize,
    pub residual: f64,
    pub sigma_hat: f64,
    pub sigma_moment: f64,
    pub ks: f64,
    /// Fraction of exactly-zero entries of `√n·v` (localized vectors).
    pub zero_fraction: f64,
    pub support_fraction: f64,
    /// Max-abs deviation of the lifted covariance from `σ̂²Σ`.
    pub cov_dev: f64,
    /// Largest per-entry deviation in units of its standard error.
    pub cov_dev_z: f64,
    pub cov_stderr_max: f64,
    /// Lifted covariance across a root edge, its stderr and the target
    /// `σ̂² f(1)`.
    pub edge_covariance: f64,
    pub edge_covariance_stderr: f64,
    pub edge_covariance_target: f64,
    /// `vᵀAv/d`, the exact lift average across an edge.
    pub edge_covariance_exact: f64,
}

pub fn local_stats<R: Rng + ?Sized>(
    g: &RegularGraph,
    v: &[f64],
    lambda: f64,
    ball: &BallIndex,
    m: usize,
    rng: &mut R,
) -> Result<LocalStatsReport> {
    check_degree(g, ball)?;
    if m < 2 {
        return invalid("need at least two lift samples");
    }
    let p = WaveParams::new(g.d(), lambda)?;
    let n = g.n();
    let scale = (n as f64).sqrt();
    let xs: Vec<f64> = v.iter().map(|x| scale * x).collect();
    let av = g.apply(v);
    let residual = av.iter().zip(v).map(|(a, x)| (a - lambda * x).powi(2)).sum::<f64>().sqrt();
    let fit = fit_sigma(&xs);
    let zeros = xs.iter().filter(|x| x.abs() <= 1e-12).count();
    let samples = lifted_samples(g, v, ball, m, rng)?;
    let (cov, se) = second_moments(&samples);
    let target = covariance_matrix(ball, &p)?.entries * (fit.sigma_hat * fit.sigma_hat);
    let mut cov_dev: f64 = 0.0;
    let mut cov_dev_z: f64 = 0.0;
    for i in 0..ball.len() {
        for j in 0..=i {
            let dev = (cov[(i, j)] - target[(i, j)]).abs();
            cov_dev = cov_dev.max(dev);
            cov_dev_z = cov_dev_z.max(if se[(i, j)] > 0.0 { dev / se[(i, j)] } else if dev > 1e-12 { f64::INFINITY } else { 0.0 });
        }
    }
    let nb = ball.adjacency[0][0];
    let edge_covariance_exact = av.iter().zip(v).map(|(a, x)| a * x).sum::<f64>() * n as f64 / (n * g.d()) as f64;
    Ok(LocalStatsReport {
        n,
        d: g.d(),
        lambda,
        ball_kind: ball.kind,
        ball_k: ball.k,
        samples: m,
        residual,
        sigma_hat: fit.sigma_hat,
        sigma_moment: fit.sigma_moment,
        ks: fit.ks,
        zero_fraction: zeros as f64 / n as f64,
        support_fraction: 1.0 - zeros as f64 / n as f64,
        cov_dev,
        cov_dev_z,
        cov_stderr_max: se.max(),
        edge_covariance: cov[(0, nb)],
        edge_covariance_stderr: se[(0, nb)],
        edge_covariance_target: target[(0, nb)],
        edge_covariance_exact,
    })
}

/// Lifted cross moments `E[√n v(φ(i)) · √n w(φ(j))]` over the same lifts.
pub fn lifted_cross_covariance<R: Rng + ?Sized>(
    g: &RegularGraph,
    v: &[f64],
    w: &[f64],
    ball: &BallIndex,
    m: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let k = ball.len();
    let joint: Vec<f64> = v.iter().chain(w).copied().collect();
    let seed = rng::fork(rng);
    let n = g.n();
    let scale = n as f64;
    let mut r = rng::stream(seed, 0);
    let mut acc = DMatrix::zeros(k, k);
    let mut image = vec![0; k];
    let mut scratch = Vec::new();
    check_degree(g, ball)?;
    if v.len() != n || w.len() != n {
        return invalid("vector length differs from the vertex count");
    }
    for _ in 0..m {
        lift_into(g, ball, &mut r, &mut image, &mut scratch);
        for i in 0..k {
            for j in 0..k {
                acc[(i, j)] += scale * joint[image[i]] * joint[n + image[j]];
            }
        }
    }
    Ok(acc / m as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct ColoringRow {
    pub h_star: EntropyEstimate,
    pub h_edge: EntropyEstimate,
    pub lhs: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyInequalityReport {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub a: u32,
    pub lifts_per_coloring: usize,
    pub seed: u64,
    pub rhs: f64,
    pub colorings: Vec<ColoringRow>,
    pub lhs: f64,
    /// Mean of `LHS − RHS` over colorings.
    pub margin: f64,
    pub stderr: f64,
}

/// Star and edge tuple entropies of the lifted coloring `t_{σ,a}(√n·v)`
/// against the mean per-vertex conditional entropy. Each coloring is one
/// draw shared by all of its lifts; edge tuples are the root and first
/// neighbor of the star lifts.
pub fn entropy_inequality_check<R: Rng + ?Sized>(
    g: &RegularGraph,
    v: &[f64],
    sigma: f64,
    a: u32,
    m: usize,
    colorings: usize,
    rng: &mut R,
) -> Result<EntropyInequalityReport> {
    let dp = DiscretizationParams::new(sigma, a)?;
    let d = g.d();
    let n = g.n();
    let base = dp.support() as u64;
    if (base as f64).powi(d as i32 + 1) > MAX_ALPHABET {
        return invalid(format!("star alphabet {base}^{} exceeds {MAX_ALPHABET:e} bins", d + 1));
    }
    if v.len() != n || m == 0 || colorings == 0 {
        return invalid("need a full vector, lifts and colorings");
    }
    let scale = (n as f64).sqrt();
    let xs: Vec<f64> = v.iter().map(|x| scale * x).collect();
    let rhs = xs.par_iter().map(|&x| pmf_entropy(&t_pmf(x, &dp))).sum::<f64>() / n as f64;
    let seed = rng::fork(rng);
    let mut rows = Vec::with_capacity(colorings);
    for c in 0..colorings {
        let mut cr = rng::stream(seed, 2 * c as u64);
        let colors: Vec<u64> = xs.iter().map(|&x| discretize_index(x, &dp, &mut cr) as u64).collect();
        let lift_seed = seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(c as u64 + 1));
        let (mut stars, mut edges): (Vec<u64>, Vec<u64>) = rng::chunks(m, LIFT_CHUNK)
            .into_par_iter()
            .enumerate()
            .flat_map_iter(|(ci, (_, len))| {
                let mut r = rng::stream(lift_seed, ci as u64);
                let mut nb = vec![0usize; d];
                (0..len)
                    .map(|_| {
                        let root = r.random_range(0..n);
                        nb.copy_from_slice(g.neighbors(root));
                        nb.shuffle(&mut r);
                        let star = nb.iter().fold(colors[root], |k, &u| k * base + colors[u]);
                        (star, colors[root] * base + colors[nb[0]])
                    })
                    .collect::<Vec<_>>()
            })
            .unzip();
        let h_star = plug_in_entropy(&run_lengths(&mut stars))?;
        let h_edge = plug_in_entropy(&run_lengths(&mut edges))?;
        let lhs = h_star.value - d as f64 / 2.0 * h_edge.value;
        rows.push(ColoringRow { h_star, h_edge, lhs, margin: lhs - rhs });
    }
    let margins: Vec<f64> = rows.iter().map(|r| r.margin).collect();
    let (margin, between) = mean_stderr(&margins);
    let k = rows.len() as f64;
    let within = rows
        .iter()
        .map(|r| r.h_star.stderr.powi(2) + (d as f64 / 2.0 * r.h_edge.stderr).powi(2))
        .sum::<f64>()
        / (k * k);
    let lhs = rows.iter().map(|r| r.lhs).sum::<f64>() / k;
    Ok(EntropyInequalityReport {
        n,
        d,
        sigma,
        a,
        lifts_per_coloring: m,
        seed,
        rhs,
        colorings: rows,
        lhs,
        margin,
        stderr: (between * between + within).sqrt(),
    })
}

fn run_lengths(keys: &mut [u64]) -> Vec<u64> {
    keys.par_sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < keys.len() {
        let mut j = i;
        while j < keys.len() && keys[j] == keys[i] {
            j += 1;
        }
        out.push((j - i) as u64);
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, random_regular};
    use crate::stats::chi2_uniform_pvalue;
    use crate::tree_ball::build_ball;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lifts_are_local_bijections() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let g = random_regular(200, 3, &mut r).unwrap();
        for (kind, k) in [(BallKind::Star, 0), (BallKind::Star, 2), (BallKind::Edge, 2)] {
            let ball = build_ball(kind, 3, k).unwrap();
            for _ in 0..50 {
                assert!(sample_lift(&g, &ball, &mut r).unwrap().is_locally_bijective(&g));
            }
        }
        let ball4 = build_ball(BallKind::Star, 4, 0).unwrap();
        assert!(sample_lift(&g, &ball4, &mut r).is_err());
    }

    #[test]
    fn root_image_uniform() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let g = random_regular(100, 3, &mut r).unwrap();
        let ball = build_ball(BallKind::Star, 3, 1).unwrap();
        let mut counts = vec![0u64; 100];
        let mut leaf = vec![0u64; 100];
        for _ in 0..100_000 {
            let l = sample_lift(&g, &ball, &mut r).unwrap();
            counts[l.image[0]] += 1;
            leaf[*l.image.last().unwrap()] += 1;
        }
        assert!(chi2_uniform_pvalue(&counts) > 0.001);
        assert!(chi2_uniform_pvalue(&leaf) > 0.001);
    }

    #[test]
    fn constant_pullback() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let g = complete_graph(3);
        let ball = build_ball(BallKind::Star, 3, 1).unwrap();
        let v = vec![0.5; 4];
        let l = sample_lift(&g, &ball, &mut r).unwrap();
        assert!(lift_pullback(&v, &l, 2.0).iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sigma_rule() {
        let mut xs = vec![0.0; 990];
        xs.extend(std::iter::repeat_n(10.0, 10));
        let f = fit_sigma(&xs);
        assert_eq!(f.sigma_hat, 0.0);
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let ys: Vec<f64> = (0..5000).map(|_| r.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let f = fit_sigma(&ys);
        assert!((f.sigma_hat - 1.0).abs() < 0.05);
    }

    #[test]
    fn constant_coloring_has_zero_margin() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let g = random_regular(50, 3, &mut r).unwrap();
        let v = vec![1.0 / 50f64.sqrt(); 50];
        let rep = entropy_inequality_check(&g, &v, 0.0, 2, 1000, 2, &mut r).unwrap();
        assert!(rep.margin.abs() < 1e-12 && rep.rhs.abs() < 1e-12);
        assert!(entropy_inequality_check(&g, &v, 0.0, 64, 10, 1, &mut r).is_err());
    }
}
