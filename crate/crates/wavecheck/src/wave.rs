//! Spherical functions of the d-regular tree, Gaussian wave covariances and
//! samplers, and the localized / delocalized almost-eigenvector
//! constructions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::RegularGraph;
use crate::linalg;
use crate::rng;
use crate::tree_ball::{eigenspace_dim, BallIndex, BallKind};

const SAMPLE_CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub d: usize,
    pub lambda: f64,
    pub x: f64,
}

impl WaveParams {
    /// Evaluation parameters; accepts any `|λ| ≤ d`.
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if d < 3 {
            return invalid(format!("degree d={d} must be at least 3"));
        }
        if !lambda.is_finite() || lambda.abs() > d as f64 {
            return invalid(format!("lambda={lambda} must satisfy |lambda| <= d={d}"));
        }
        Ok(Self::unchecked(d, lambda))
    }

    /// Parameters for sampling; requires `|λ| ≤ 2√(d−1)`.
    pub fn sampling(d: usize, lambda: f64) -> Result<Self> {
        let p = Self::new(d, lambda)?;
        p.check_spectrum()?;
        Ok(p)
    }

    pub(crate) fn unchecked(d: usize, lambda: f64) -> Self {
        WaveParams { d, lambda, x: lambda / (2.0 * ((d - 1) as f64).sqrt()) }
    }

    pub fn spectral_bound(&self) -> f64 {
        2.0 * ((self.d - 1) as f64).sqrt()
    }

    pub fn check_spectrum(&self) -> Result<()> {
        let bound = self.spectral_bound();
        if self.lambda.abs() > bound * (1.0 + 1e-12) {
            return Err(Error::OutOfSpectrum { lambda: self.lambda, bound });
        }
        Ok(())
    }
}

/// Chebyshev polynomial of the second kind by the three-term recurrence.
pub fn chebyshev_u(k: i64, x: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for _ in 0..k {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Correlation of the Gaussian wave at tree distance `k`.
pub fn spherical_f(k: usize, p: &WaveParams) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let d = p.d as f64;
    let k = k as i64;
    let q = ((d - 1.0) / d).sqrt() * chebyshev_u(k, p.x) - chebyshev_u(k - 2, p.x) / (d * (d - 1.0)).sqrt();
    q / (d * (d - 1.0).powi((k - 1) as i32)).sqrt()
}

/// `f(0), …, f(kmax)`.
pub fn spherical_table(kmax: usize, p: &WaveParams) -> Vec<f64> {
    (0..=kmax).map(|k| spherical_f(k, p)).collect()
}

/// Covariance over a ball, with the ball kept alongside the entries.
#[derive(Clone, Debug)]
pub struct CovMatrix<'a> {
    pub ball: &'a BallIndex,
    pub params: WaveParams,
    pub entries: DMatrix<f64>,
}

impl CovMatrix<'_> {
    pub fn expected_rank(&self) -> usize {
        eigenspace_dim(self.ball.kind, self.ball.d, self.ball.k).unwrap()
    }

    /// Count of eigenvalues above `1e-8 λ_max`.
    pub fn rank(&self) -> Result<usize> {
        let ev = linalg::sym_eigenvalues(&self.entries)?;
        let top = ev.last().copied().unwrap_or(0.0);
        Ok(ev.iter().filter(|&&l| l > 1e-8 * top).count())
    }
}

/// Matrix with entry `(u,v) = g(dist(u,v))`.
pub fn distance_kernel_matrix(ball: &BallIndex, g: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let n = ball.len();
    let table = ball.distance_table();
    let maxd = table.iter().copied().max().unwrap_or(0) as usize;
    let vals: Vec<f64> = (0..=maxd).map(g).collect();
    DMatrix::from_fn(n, n, |i, j| vals[table[i * n + j] as usize])
}

pub fn covariance_matrix<'a>(ball: &'a BallIndex, p: &WaveParams) -> Result<CovMatrix<'a>> {
    if ball.d != p.d {
        return invalid(format!("ball degree {} differs from wave degree {}", ball.d, p.d));
    }
    p.check_spectrum()?;
    let entries = distance_kernel_matrix(ball, |k| spherical_f(k, p));
    Ok(CovMatrix { ball, params: *p, entries })
}

fn check_sampling(ball: &BallIndex, p: &WaveParams) -> Result<()> {
    if ball.d != p.d {
        return invalid(format!("ball degree {} differs from wave degree {}", ball.d, p.d));
    }
    p.check_spectrum()?;
    if (p.lambda.abs() - p.d as f64).abs() < 1e-12 {
        return invalid("trivial eigenvalue lambda = ±d is not sampled");
    }
    Ok(())
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn par_draws<F>(n: usize, seed: u64, draw: F) -> Vec<Vec<f64>>
where
    F: Fn(&mut rng::StreamRng) -> Vec<f64> + Sync,
{
    rng::chunks(n, SAMPLE_CHUNK)
        .into_par_iter()
        .enumerate()
        .flat_map_iter(|(ci, (_, len))| {
            let mut r = rng::stream(seed, ci as u64);
            (0..len).map(|_| draw(&mut r)).collect::<Vec<_>>()
        })
        .collect()
}

/// Draws from the Gaussian wave on `ball` through an eigen-factorization of
/// its covariance.
pub fn sample_wave_direct<R: Rng + ?Sized>(
    ball: &BallIndex,
    p: &WaveParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_sampling(ball, p)?;
    let cov = covariance_matrix(ball, p)?;
    let l = linalg::psd_factor(&cov.entries, 1e-10)?;
    let seed = rng::fork(rng);
    Ok(par_draws(n, seed, |r| {
        let z = gaussian_vec(r, l.ncols());
        (&l * z).iter().copied().collect()
    }))
}

/// Conditional law of the `d−1` outer neighbors of a star center given the
/// center value and one neighbor value: `children = K·(x_w, x_anchor) + L z`.
struct StarExtension {
    gain: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl StarExtension {
    fn new(p: &WaveParams) -> Result<Self> {
        let d = p.d;
        let f1 = spherical_f(1, p);
        let f2 = spherical_f(2, p);
        // order: center, anchor, d-1 children
        let cov = |i: usize, j: usize| -> f64 {
            if i == j {
                1.0
            } else if i == 0 || j == 0 {
                f1
            } else {
                f2
            }
        };
        let m = d - 1;
        let sbb = DMatrix::from_fn(2, 2, &cov);
        let scb = DMatrix::from_fn(m, 2, |i, j| cov(i + 2, j));
        let scc = DMatrix::from_fn(m, m, |i, j| cov(i + 2, j + 2));
        let sbb_inv = linalg::pinv_sym(&sbb, 1e-10)?;
        let gain = &scb * &sbb_inv;
        let cond = &scc - &gain * scb.transpose();
        let factor = linalg::psd_factor(&cond, 1e-10)?;
        Ok(StarExtension { gain, factor })
    }

    fn extend<R: Rng + ?Sized>(&self, xw: f64, xa: f64, rng: &mut R, out: &mut [f64]) {
        let z = gaussian_vec(rng, self.factor.ncols());
        let noise = &self.factor * z;
        for i in 0..out.len() {
            out[i] = self.gain[(i, 0)] * xw + self.gain[(i, 1)] * xa + noise[i];
        }
    }
}

/// Draws from the Gaussian wave by growing the sample outward from the
/// central star (or central edge), one conditional star at a time.
pub fn sample_wave_markov<R: Rng + ?Sized>(
    ball: &BallIndex,
    p: &WaveParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_sampling(ball, p)?;
    let ext = StarExtension::new(p)?;
    let seed_factor = match ball.kind {
        BallKind::Star => {
            let f1 = spherical_f(1, p);
            let f2 = spherical_f(2, p);
            let s0 = DMatrix::from_fn(p.d + 1, p.d + 1, |i, j| {
                if i == j {
                    1.0
                } else if i == 0 || j == 0 {
                    f1
                } else {
                    f2
                }
            });
            linalg::psd_factor(&s0, 1e-10)?
        }
        BallKind::Edge => {
            let f1 = spherical_f(1, p);
            linalg::psd_factor(&DMatrix::from_row_slice(2, 2, &[1.0, f1, f1, 1.0]), 1e-10)?
        }
    };
    // Seed vertex set in ball order: star = root and its children.
    let seeded: Vec<usize> = match ball.kind {
        BallKind::Star => std::iter::once(0).chain(ball.children[0].iter().copied()).collect(),
        BallKind::Edge => vec![0, 1],
    };
    let extend_from: Vec<(usize, usize)> = (0..ball.len())
        .filter(|&v| !ball.boundary[v] && !(ball.kind == BallKind::Star && v == 0))
        .map(|v| (v, ball.parent[v].unwrap_or_else(|| 1 - v)))
        .collect();
    let seed = rng::fork(rng);
    Ok(par_draws(n, seed, |r| {
        let mut x = vec![0.0; ball.len()];
        let z = gaussian_vec(r, seed_factor.ncols());
        let s = &seed_factor * z;
        for (i, &v) in seeded.iter().enumerate() {
            x[v] = s[i];
        }
        let mut buf = vec![0.0; p.d - 1];
        for &(v, anchor) in &extend_from {
            ext.extend(x[v], x[anchor], r, &mut buf);
            for (c, &val) in ball.children[v].iter().zip(&buf) {
                x[*c] = val;
            }
        }
        x
    }))
}

/// `v(u) = f(dist(center,u))` for `dist < r`, zero elsewhere, unit norm.
pub fn localized_vector(g: &RegularGraph, center: usize, r: usize, p: &WaveParams) -> Result<Vec<f64>> {
    if r < 1 {
        return invalid("localized vector needs radius r >= 1");
    }
    if center >= g.n() {
        return invalid(format!("center {center} out of range"));
    }
    let dist = g.bfs_distances(center, r - 1);
    let fs = spherical_table(r, p);
    let mut v: Vec<f64> = dist
        .iter()
        .map(|&dd| if dd < r { fs[dd] } else { 0.0 })
        .collect();
    normalize(&mut v)?;
    Ok(v)
}

/// Residual `‖Av − λv‖` of the normalized localized vector on the infinite
/// tree, evaluated on `B_{r−1}(C)`.
pub fn localized_tree_residual(p: &WaveParams, r: usize) -> Result<f64> {
    if r < 1 {
        return invalid("localized vector needs radius r >= 1");
    }
    let ball = crate::tree_ball::build_ball(BallKind::Star, p.d, r - 1)?;
    let v: Vec<f64> = ball
        .depth
        .iter()
        .map(|&dd| if dd < r { spherical_f(dd, p) } else { 0.0 })
        .collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let res: f64 = (0..ball.len())
        .map(|u| {
            let s: f64 = ball.adjacency[u].iter().map(|&w| v[w]).sum();
            (s - p.lambda * v[u]).powi(2)
        })
        .sum();
    Ok(res.sqrt() / norm)
}

pub(crate) fn normalize(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numerical("cannot normalize a zero vector".into()));
    }
    v.iter_mut().for_each(|a| *a /= norm);
    Ok(())
}

/// Radial kernel `X_o = Σ_{|u|≤r} c_{|u|} Z_u` together with its tree
/// eigenvector residual `E[(Σ_{v∼o} X_v − λ X_o)²]` at unit variance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelCoeffs {
    pub r: usize,
    pub c: Vec<f64>,
    pub objective: f64,
}

/// Sphere sizes `N_0 = 1`, `N_j = d(d−1)^{j−1}`.
fn sphere_sizes(d: usize, r: usize) -> Vec<f64> {
    (0..=r)
        .map(|j| if j == 0 { 1.0 } else { d as f64 * ((d - 1) as f64).powi(j as i32 - 1) })
        .collect()
}

impl KernelCoeffs {
    pub fn variance(&self, d: usize) -> f64 {
        let n = sphere_sizes(d, self.r);
        self.c.iter().zip(&n).map(|(c, n)| n * c * c).sum()
    }

    /// Tree residual of an arbitrary kernel, not renormalized.
    pub fn tree_objective(c: &[f64], p: &WaveParams) -> f64 {
        let r = c.len() - 1;
        let n = sphere_sizes(p.d, r + 1);
        let cc = |j: usize| c.get(j).copied().unwrap_or(0.0);
        let d = p.d as f64;
        (0..=r + 1)
            .map(|j| {
                let h = if j == 0 {
                    d * cc(1) - p.lambda * cc(0)
                } else {
                    cc(j - 1) + (d - 1.0) * cc(j + 1) - p.lambda * cc(j)
                };
                n[j] * h * h
            })
            .sum()
    }
}

/// Minimizes the tree eigenvector residual over radial kernels of radius
/// `r` at unit variance. The objective is a quadratic form so the optimum
/// is the bottom generalized eigenvector against the variance form.
pub fn linear_factor_coeffs(p: &WaveParams, r: usize) -> Result<KernelCoeffs> {
    p.check_spectrum()?;
    let nn = sphere_sizes(p.d, r + 1);
    let d = p.d as f64;
    // h = H c, H is (r+2) x (r+1)
    let mut h = DMatrix::zeros(r + 2, r + 1);
    h[(0, 0)] = -p.lambda;
    if r >= 1 {
        h[(0, 1)] = d;
    }
    for j in 1..=r + 1 {
        h[(j, j - 1)] = 1.0;
        if j <= r {
            h[(j, j)] = -p.lambda;
        }
        if j < r {
            h[(j, j + 1)] = d - 1.0;
        }
    }
    let w = DMatrix::from_diagonal(&DVector::from_vec(nn.clone()));
    let a = h.transpose() * w * &h;
    let bs: Vec<f64> = nn[..=r].iter().map(|x| x.sqrt()).collect();
    let m = DMatrix::from_fn(r + 1, r + 1, |i, j| a[(i, j)] / (bs[i] * bs[j]));
    let (vals, vecs) = linalg::sym_eigen(&m)?;
    let mut c: Vec<f64> = (0..=r).map(|i| vecs[(i, 0)] / bs[i]).collect();
    if c[0] < 0.0 {
        c.iter_mut().for_each(|x| *x = -*x);
    }
    let objective = KernelCoeffs::tree_objective(&c, p);
    debug_assert!((objective - vals[0]).abs() < 1e-8 * (1.0 + vals[0].abs()));
    Ok(KernelCoeffs { r, c, objective })
}

/// `y_v = Σ_{dist(u,v)≤r} c_{dist(u,v)} z_u` for i.i.d. standard normal `z`,
/// normalized to unit length.
pub fn apply_local_kernel<R: Rng + ?Sized>(g: &RegularGraph, kc: &KernelCoeffs, rng: &mut R) -> Result<Vec<f64>> {
    let z: Vec<f64> = (0..g.n()).map(|_| rng.sample(StandardNormal)).collect();
    let mut y: Vec<f64> = (0..g.n())
        .into_par_iter()
        .map(|v| {
            g.bfs_ball(v, kc.r)
                .into_iter()
                .map(|(u, dd)| kc.c[dd] * z[u])
                .sum()
        })
        .collect();
    normalize(&mut y)?;
    Ok(y)
}
