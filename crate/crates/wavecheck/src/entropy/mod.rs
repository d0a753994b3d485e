//! Entropy toolkit: Gaussian log-det entropies, nearest-neighbor and plug-in
//! estimators, the randomized grid discretization, the star functional and
//! the heat-flow identities.

pub mod debruijn;
pub mod discretize;
pub mod knn;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::spectrum::logdet_sp;
use crate::wave::{spherical_f, WaveParams};

pub use debruijn::{debruijn_check, DeBruijnReport, GaussianMixture};
pub use discretize::{check_finombecsles, discretize_t, DiscretizationParams, FinombecslesReport, LadderSource};
pub use knn::{knn_entropy, DEFAULT_K};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Knn,
    PlugIn,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
}

impl EntropyEstimate {
    pub fn exact(value: f64) -> Self {
        EntropyEstimate { value, stderr: 0.0, method: Method::ClosedForm }
    }
}

const LOG_2PIE: f64 = 2.837_877_066_409_345_4;

/// `½(m log 2πe + log det_sp M)`, `m` the expected rank.
pub fn gaussian_entropy_sp(m: &DMatrix<f64>, expected_rank: usize) -> Result<EntropyEstimate> {
    check_symmetric(m)?;
    let ld = logdet_sp(m, expected_rank)?;
    Ok(EntropyEstimate::exact(0.5 * (expected_rank as f64 * LOG_2PIE + ld)))
}

/// Entropy of a non-degenerate Gaussian through a Cholesky factor.
pub fn gaussian_entropy(m: &DMatrix<f64>) -> Result<EntropyEstimate> {
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(EntropyEstimate::exact(0.0));
    }
    let ch = nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| Error::Precondition("covariance is not positive definite".into()))?;
    let ld: f64 = 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok(EntropyEstimate::exact(0.5 * (m.nrows() as f64 * LOG_2PIE + ld)))
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return invalid("covariance must be square");
    }
    let scale = m.amax().max(1e-300);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return invalid("covariance must be symmetric");
    }
    Ok(())
}

/// Empirical Shannon entropy. The stderr adds the Miller-Madow bias scale
/// `(K−1)/(2n)` to the delta-method standard error.
pub fn plug_in_entropy(counts: &[u64]) -> Result<EntropyEstimate> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return invalid("histogram is empty");
    }
    let nf = n as f64;
    let mut h = 0.0;
    let mut h2 = 0.0;
    let mut support = 0usize;
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = c as f64 / nf;
        h -= p * p.ln();
        h2 += p * p.ln() * p.ln();
        support += 1;
    }
    let var = (h2 - h * h).max(0.0);
    let stderr = (var / nf).sqrt() + (support as f64 - 1.0) / (2.0 * nf);
    Ok(EntropyEstimate { value: h, stderr, method: Method::PlugIn })
}

#[derive(Clone, Debug, Serialize)]
pub struct SubmodularityReport {
    pub h_xyz: f64,
    pub h_xz: f64,
    pub h_yz: f64,
    pub h_z: f64,
    /// `𝔻(X,Z) + 𝔻(Y,Z) − 𝔻(Z) − 𝔻(X,Y,Z)`, non-negative.
    pub gap: f64,
    pub max_partial_covariance: f64,
    pub conditionally_independent: bool,
    pub holds: bool,
}

fn sub(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Closed-form check of `𝔻(X,Y,Z) ≤ 𝔻(X,Z) + 𝔻(Y,Z) − 𝔻(Z)` for a Gaussian
/// vector split into index blocks.
pub fn submodularity_check(sigma: &DMatrix<f64>, x: &[usize], y: &[usize], z: &[usize]) -> Result<SubmodularityReport> {
    let n = sigma.nrows();
    let mut seen = vec![false; n];
    for &i in x.iter().chain(y).chain(z) {
        if i >= n || seen[i] {
            return invalid("blocks must be disjoint indices of the covariance");
        }
        seen[i] = true;
    }
    if x.is_empty() || y.is_empty() {
        return invalid("X and Y blocks must be non-empty");
    }
    let cat = |a: &[usize], b: &[usize]| -> Vec<usize> { a.iter().chain(b).copied().collect() };
    let xyz: Vec<usize> = x.iter().chain(y).chain(z).copied().collect();
    let h = |idx: &[usize]| gaussian_entropy(&sub(sigma, idx, idx)).map(|e| e.value);
    let (h_xyz, h_xz, h_yz, h_z) = (h(&xyz)?, h(&cat(x, z))?, h(&cat(y, z))?, h(z)?);
    let mut partial = sub(sigma, x, y);
    if !z.is_empty() {
        let szz = sub(sigma, z, z);
        let ch = nalgebra::Cholesky::new(szz)
            .ok_or_else(|| Error::Precondition("covariance is not positive definite".into()))?;
        partial -= sub(sigma, x, z) * ch.solve(&sub(sigma, z, y));
    }
    let max_partial_covariance = partial.amax();
    let gap = h_xz + h_yz - h_z - h_xyz;
    Ok(SubmodularityReport {
        h_xyz,
        h_xz,
        h_yz,
        h_z,
        gap,
        max_partial_covariance,
        conditionally_independent: max_partial_covariance <= 1e-12 * sigma.amax(),
        holds: gap >= -1e-12,
    })
}

/// Covariance of the star `(X₁..X_d, Z)` under the Gaussian wave.
pub fn star_covariance(p: &WaveParams) -> DMatrix<f64> {
    let d = p.d;
    let (f1, f2) = (spherical_f(1, p), spherical_f(2, p));
    DMatrix::from_fn(d + 1, d + 1, |i, j| match (i == d, j == d) {
        (true, true) => 1.0,
        (true, false) | (false, true) => f1,
        _ if i == j => 1.0,
        _ => f2,
    })
}

/// Fixed coordinates for the star functional, computed from the Gaussian wave:
/// `y = Λ^{-1/2} Uᵀ x` on the support of the star covariance and a whitening
/// of the `(X₁, Z)` marginal.
#[derive(Clone, Debug)]
pub struct StarCoordinates {
    d: usize,
    lambda: f64,
    map: DMatrix<f64>,
    log_det_sp: f64,
    edge_map: DMatrix<f64>,
    log_det_edge: f64,
}

impl StarCoordinates {
    pub fn new(p: &WaveParams) -> Result<Self> {
        p.check_spectrum()?;
        let d = p.d;
        let f1 = spherical_f(1, p);
        if 1.0 - f1 * f1 <= 1e-12 {
            return Err(Error::Precondition("edge marginal is degenerate at |λ| = d".into()));
        }
        let sigma = star_covariance(p);
        let (vals, vecs) = linalg::sym_eigen(&sigma)?;
        let top = vals[d];
        if vals[0] > 1e-10 * top || vals[1] <= 1e-10 * top {
            return Err(Error::RankMismatch {
                expected: d,
                found: vals.iter().filter(|&&v| v > 1e-10 * top).count(),
            });
        }
        let mut map = DMatrix::zeros(d, d + 1);
        for r in 0..d {
            let s = vals[r + 1].sqrt();
            for c in 0..=d {
                map[(r, c)] = vecs[(c, r + 1)] / s;
            }
        }
        let log_det_sp = vals[1..].iter().map(|v| v.ln()).sum();
        let c = DMatrix::from_row_slice(2, 2, &[1.0, f1, f1, 1.0]);
        let (cv, cu) = linalg::sym_eigen(&c)?;
        let edge_map = DMatrix::from_fn(2, 2, |i, j| cu[(j, i)] / cv[i].sqrt());
        Ok(StarCoordinates { d, lambda: p.lambda, map, log_det_sp, edge_map, log_det_edge: cv[0].ln() + cv[1].ln() })
    }
}

/// `𝔻_sp(X₁..X_d, Z) − (d/2)·𝔻(X₁, Z)` estimated by nearest neighbors.
/// Each sample is ordered `(X₁, …, X_d, Z)` and must satisfy
/// `X₁ + … + X_d = λZ`.
pub fn functional_d(samples: &[Vec<f64>], p: &WaveParams) -> Result<EntropyEstimate> {
    functional_d_with(samples, &StarCoordinates::new(p)?, DEFAULT_K)
}

pub fn functional_d_with(samples: &[Vec<f64>], sc: &StarCoordinates, k: usize) -> Result<EntropyEstimate> {
    let d = sc.d;
    for (i, s) in samples.iter().enumerate() {
        if s.len() != d + 1 {
            return invalid(format!("sample {i} has {} coordinates, expected {}", s.len(), d + 1));
        }
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let defect = s[..d].iter().sum::<f64>() - sc.lambda * s[d];
        if defect.abs() > 1e-8 * norm.max(1.0) {
            return Err(Error::Precondition(format!(
                "sample {i} violates the eigenvector equation at the center by {defect:e}"
            )));
        }
    }
    let mapped: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| (0..d).map(|r| (0..=d).map(|c| sc.map[(r, c)] * s[c]).sum()).collect())
        .collect();
    let edge: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let v = [s[0], s[d]];
            (0..2).map(|r| sc.edge_map[(r, 0)] * v[0] + sc.edge_map[(r, 1)] * v[1]).collect()
        })
        .collect();
    let star = knn_entropy(&mapped, k)?;
    let pair = knn_entropy(&edge, k)?;
    let half_d = d as f64 / 2.0;
    let value = star.value + 0.5 * sc.log_det_sp - half_d * (pair.value + 0.5 * sc.log_det_edge);
    let stderr = (star.stderr.powi(2) + (half_d * pair.stderr).powi(2)).sqrt();
    Ok(EntropyEstimate { value, stderr, method: Method::Knn })
}

/// `𝒟` of the Gaussian wave in closed form.
pub fn functional_d_gaussian(p: &WaveParams) -> Result<EntropyEstimate> {
    p.check_spectrum()?;
    let star = gaussian_entropy_sp(&star_covariance(p), p.d)?;
    let f1 = spherical_f(1, p);
    let pair = LOG_2PIE + 0.5 * (1.0 - f1 * f1).ln();
    Ok(EntropyEstimate::exact(star.value - p.d as f64 / 2.0 * pair))
}
