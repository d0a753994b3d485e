//! Kozachenko-Leonenko nearest-neighbor entropy estimator.

use kiddo::{KdTree, SquaredEuclidean};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use super::{EntropyEstimate, Method};
use crate::error::{invalid, Error, Result};
use crate::linalg;

pub const DEFAULT_K: usize = 4;
const MAX_DIM: usize = 8;

fn kth_distances<const M: usize>(pts: &[Vec<f64>], k: usize) -> Vec<f64> {
    let arr: Vec<[f64; M]> = pts
        .iter()
        .map(|p| {
            let mut a = [0.0; M];
            a.copy_from_slice(p);
            a
        })
        .collect();
    let tree: KdTree<f64, M> = (&arr).into();
    arr.par_iter()
        .map(|q| {
            let nn = tree.nearest_n::<SquaredEuclidean>(q, k + 1);
            nn.last().map(|x| x.distance.sqrt()).unwrap_or(0.0)
        })
        .collect()
}

fn distances(pts: &[Vec<f64>], m: usize, k: usize) -> Vec<f64> {
    match m {
        1 => kth_distances::<1>(pts, k),
        2 => kth_distances::<2>(pts, k),
        3 => kth_distances::<3>(pts, k),
        4 => kth_distances::<4>(pts, k),
        5 => kth_distances::<5>(pts, k),
        6 => kth_distances::<6>(pts, k),
        7 => kth_distances::<7>(pts, k),
        8 => kth_distances::<8>(pts, k),
        _ => unreachable!(),
    }
}

fn covariance(pts: &[Vec<f64>], m: usize) -> DMatrix<f64> {
    let n = pts.len() as f64;
    let mut mean = vec![0.0; m];
    for p in pts {
        for i in 0..m {
            mean[i] += p[i] / n;
        }
    }
    let mut c = DMatrix::zeros(m, m);
    for p in pts {
        for i in 0..m {
            for j in 0..=i {
                c[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            c[(j, i)] = c[(i, j)];
        }
    }
    c
}

/// Differential entropy (nats) of the law behind `samples`, from the
/// distance to the `k`-th nearest neighbor:
/// `ψ(N) − ψ(k) + log V_m + (m/N) Σ log ε_i`.
pub fn knn_entropy(samples: &[Vec<f64>], k: usize) -> Result<EntropyEstimate> {
    let n = samples.len();
    if n < 100 {
        return invalid(format!("knn entropy needs at least 100 samples, got {n}"));
    }
    let m = samples[0].len();
    if m == 0 || m > MAX_DIM {
        return invalid(format!("knn entropy supports 1..={MAX_DIM} dimensions, got {m}"));
    }
    if k == 0 || k >= n {
        return invalid("neighbor index out of range");
    }
    if samples.iter().any(|s| s.len() != m || s.iter().any(|x| !x.is_finite())) {
        return invalid("samples must be finite and of equal dimension");
    }
    let ev = linalg::sym_eigenvalues(&covariance(samples, m))?;
    let top = ev[m - 1];
    if ev[0] < 1e-10 * top {
        return Err(Error::Precondition(format!(
            "sample cloud is rank deficient (eigenvalues {ev:?}); project it first"
        )));
    }
    let mut eps = distances(samples, m, k);
    if eps.contains(&0.0) {
        // ties: perturb every point by 1e-12 of the sample scale
        let scale = 1e-12 * top.sqrt();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(0x6a17);
        let jittered: Vec<Vec<f64>> = samples
            .iter()
            .map(|p| p.iter().map(|x| x + scale * r.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        eps = distances(&jittered, m, k);
    }
    let mf = m as f64;
    let log_vm = 0.5 * mf * std::f64::consts::PI.ln() - ln_gamma(0.5 * mf + 1.0);
    let terms: Vec<f64> = eps.iter().map(|e| mf * e.max(f64::MIN_POSITIVE).ln()).collect();
    let (mean, se) = crate::stats::mean_stderr(&terms);
    Ok(EntropyEstimate {
        value: digamma(n as f64) - digamma(k as f64) + log_vm + mean,
        stderr: se,
        method: Method::Knn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn normals(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..m).map(|_| r.sample(StandardNormal)).collect()).collect()
    }

    #[test]
    fn gaussian_1d_and_uniform() {
        let e = knn_entropy(&normals(20_000, 1, 1), DEFAULT_K).unwrap();
        assert!((e.value - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()).abs() < 0.05);
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<Vec<f64>> = (0..20_000).map(|_| vec![r.random::<f64>()]).collect();
        assert!(knn_entropy(&u, DEFAULT_K).unwrap().value.abs() < 0.05);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(knn_entropy(&normals(50, 2, 1), 4).is_err());
        let flat: Vec<Vec<f64>> = normals(500, 1, 3).into_iter().map(|v| vec![v[0], 2.0 * v[0]]).collect();
        assert!(matches!(knn_entropy(&flat, 4), Err(Error::Precondition(_))));
    }

    #[test]
    fn duplicates_are_jittered() {
        let mut pts = normals(1000, 2, 4);
        let copy = pts[..500].to_vec();
        pts.extend(copy);
        assert!(knn_entropy(&pts, 4).unwrap().value.is_finite());
    }
}
