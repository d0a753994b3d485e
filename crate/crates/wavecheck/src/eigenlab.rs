//! Spectra of finite regular graphs: dense and Lanczos eigensolvers, λ₂,
//! spectral-window almost eigenvectors and the Kesten-McKay comparison.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::RegularGraph;
use crate::linalg;
use crate::rng::StreamRng;

pub const DENSE_LIMIT: usize = 4096;
/// Extreme mode keeps this many pairs at each end of the spectrum.
pub const EXTREME_PAIRS: usize = 8;
/// Floor on the Lanczos iteration cap; the edge of a random regular spectrum
/// is crowded, so `10√n` steps alone are too few for small graphs.
pub const MIN_LANCZOS_STEPS: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMode {
    Dense,
    Extreme,
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    pub mode: SpectralMode,
    pub d: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub max_residual: f64,
    /// Whether the constant vector was projected out before solving.
    pub deflated: bool,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i).iter().copied().collect()
    }

    /// Index of the eigenvalue nearest `lambda` whose eigenvector is
    /// orthogonal to the constants.
    pub fn nearest_nonconstant(&self, lambda: f64) -> Option<usize> {
        let n = self.eigenvectors.nrows() as f64;
        (0..self.len())
            .filter(|&i| self.eigenvectors.column(i).sum().abs() / n.sqrt() < 1e-6)
            .min_by(|&a, &b| (self.eigenvalues[a] - lambda).abs().total_cmp(&(self.eigenvalues[b] - lambda).abs()))
    }

    /// One `lambda` column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda")?;
        for l in &self.eigenvalues {
            writeln!(w, "{l:.17e}")?;
        }
        Ok(())
    }

    /// Eigenvector dump: one row per vertex, one `q<i>` column per pair.
    pub fn write_eigenvectors_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.eigenvectors.ncols();
        let header: Vec<String> = std::iter::once("vertex".to_string()).chain((0..m).map(|i| format!("q{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for v in 0..self.eigenvectors.nrows() {
            let row: Vec<String> = (0..m).map(|i| format!("{:.17e}", self.eigenvectors[(v, i)])).collect();
            writeln!(w, "{v},{}", row.join(","))?;
        }
        Ok(())
    }
}

fn adjacency_matrix(g: &RegularGraph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.n(), g.n());
    for v in 0..g.n() {
        for &u in g.neighbors(v) {
            a[(v, u)] += 1.0;
        }
    }
    a
}

fn pair_residual(g: &RegularGraph, q: &[f64], lambda: f64) -> f64 {
    g.apply(q).iter().zip(q).map(|(a, x)| (a - lambda * x).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

pub fn eigendecompose(g: &RegularGraph, mode: SpectralMode) -> Result<SpectralData> {
    match mode {
        SpectralMode::Dense => dense(g),
        SpectralMode::Extreme => lanczos(g, false, EXTREME_PAIRS),
    }
}

fn dense(g: &RegularGraph) -> Result<SpectralData> {
    if g.n() > DENSE_LIMIT {
        return invalid(format!("dense mode is limited to {DENSE_LIMIT} vertices, graph has {}", g.n()));
    }
    let (vals, vecs) = linalg::sym_eigen(&adjacency_matrix(g))?;
    let mut max_residual: f64 = 0.0;
    for (i, &l) in vals.iter().enumerate() {
        let q: Vec<f64> = vecs.column(i).iter().copied().collect();
        max_residual = max_residual.max(pair_residual(g, &q, l));
    }
    finish(g, SpectralMode::Dense, vals, vecs, max_residual, false)
}

fn finish(
    g: &RegularGraph,
    mode: SpectralMode,
    vals: Vec<f64>,
    vecs: DMatrix<f64>,
    max_residual: f64,
    deflated: bool,
) -> Result<SpectralData> {
    let d = g.d() as f64;
    if max_residual > 1e-8 * d {
        return Err(Error::Numerical(format!("eigenpair residual {max_residual:e} exceeds 1e-8·d")));
    }
    if vals.iter().any(|l| l.abs() > d + 1e-8) {
        return Err(Error::Numerical("eigenvalue outside [−d, d]".into()));
    }
    Ok(SpectralData { mode, d: g.d(), eigenvalues: vals, eigenvectors: vecs, max_residual, deflated })
}

/// Lanczos with full reorthogonalization for the `want` lowest and highest
/// pairs. Breakdowns restart from a fresh random direction so small graphs
/// end with the whole spectrum.
fn lanczos(g: &RegularGraph, deflate: bool, want: usize) -> Result<SpectralData> {
    let n = g.n();
    let d = g.d() as f64;
    let limit = if deflate { n - 1 } else { n };
    if limit == 0 {
        return finish(g, SpectralMode::Extreme, vec![], DMatrix::zeros(n, 0), 0.0, deflate);
    }
    let max_iter = ((10.0 * (n as f64).sqrt()).ceil() as usize).max(MIN_LANCZOS_STEPS).min(limit);
    let mut rng = StreamRng::seed_from_u64(0x01a2_c305 ^ n as u64);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let fresh = |basis: &[Vec<f64>], rng: &mut StreamRng| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut q: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            if deflate {
                remove_mean(&mut q);
            }
            for _ in 0..2 {
                for b in basis {
                    let c = dot(b, &q);
                    q.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = dot(&q, &q).sqrt();
            if norm > 1e-6 {
                return Some(q.into_iter().map(|x| x / norm).collect());
            }
        }
        None
    };
    let mut q = fresh(&basis, &mut rng).ok_or_else(|| Error::Numerical("no start vector".into()))?;
    let mut next_check = (2 * want + 2).min(max_iter);
    loop {
        let mut w = g.apply(&q);
        if deflate {
            remove_mean(&mut w);
        }
        let a = dot(&q, &w);
        basis.push(q);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = basis.len();
        if m == next_check || m == max_iter || b < 1e-10 * d {
            next_check = (next_check * 5 / 4).max(next_check + 1).min(max_iter);
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let (theta, s) = linalg::sym_eigen(&t)?;
            let wanted: Vec<usize> = if m <= 2 * want {
                (0..m).collect()
            } else {
                (0..want).chain(m - want..m).collect()
            };
            let converged = wanted.iter().all(|&i| b * s[(m - 1, i)].abs() <= 1e-9 * d);
            if converged || m == limit {
                let vecs = DMatrix::from_fn(n, wanted.len(), |v, c| (0..m).map(|r| basis[r][v] * s[(r, wanted[c])]).sum());
                let vals: Vec<f64> = wanted.iter().map(|&i| theta[i]).collect();
                let mut max_residual: f64 = 0.0;
                for (c, &l) in vals.iter().enumerate() {
                    let qv: Vec<f64> = vecs.column(c).iter().copied().collect();
                    max_residual = max_residual.max(pair_residual(g, &qv, l));
                }
                return finish(g, SpectralMode::Extreme, vals, vecs, max_residual, deflate);
            }
            if m == max_iter {
                return Err(Error::Numerical(format!("Lanczos did not converge within {max_iter} iterations")));
            }
        }
        if b < 1e-10 * d {
            beta.push(0.0);
            q = fresh(&basis, &mut rng).ok_or_else(|| Error::Numerical("Krylov restart failed".into()))?;
        } else {
            beta.push(b);
            q = w.into_iter().map(|x| x / b).collect();
        }
    }
}

/// Largest `|λ|` once the constant eigenvector is deflated. A second
/// eigenvalue `d` (disconnected graph) is reported as is.
pub fn lambda2(g: &RegularGraph) -> Result<f64> {
    let sd = lanczos(g, true, EXTREME_PAIRS)?;
    Ok(sd.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max))
}

/// λ₂ from a full dense spectrum: drop the top eigenvalue once.
pub fn lambda2_dense(sd: &SpectralData) -> Result<f64> {
    if sd.mode != SpectralMode::Dense {
        return invalid("dense spectral data required");
    }
    let m = sd.len();
    Ok(sd.eigenvalues[..m.saturating_sub(1)].iter().map(|l| l.abs()).fold(0.0, f64::max))
}

/// Random unit combination of the non-constant eigenvectors with eigenvalue
/// in `[λ−ε, λ+ε]`.
pub fn spectral_window_vector<R: Rng + ?Sized>(sd: &SpectralData, lambda: f64, eps: f64, rng: &mut R) -> Result<Vec<f64>> {
    if sd.mode != SpectralMode::Dense {
        return invalid("window vectors need dense spectral data");
    }
    if !(eps >= 0.0) {
        return invalid("window half-width must be non-negative");
    }
    let idx: Vec<usize> = (0..sd.len()).filter(|&i| (sd.eigenvalues[i] - lambda).abs() <= eps).collect();
    let n = sd.eigenvectors.nrows();
    let mut v = vec![0.0; n];
    // direction of the constant inside the window span
    let mut u = vec![0.0; n];
    for &i in &idx {
        let col = sd.eigenvectors.column(i);
        let c = col.sum() / (n as f64).sqrt();
        let gcoef: f64 = rng.sample(StandardNormal);
        for (k, x) in col.iter().enumerate() {
            v[k] += gcoef * x;
            u[k] += c * x;
        }
    }
    let un = dot(&u, &u).sqrt();
    if un > 1e-12 {
        let c = dot(&u, &v) / (un * un);
        v.iter_mut().zip(&u).for_each(|(x, y)| *x -= c * y);
    }
    let norm = dot(&v, &v).sqrt();
    if idx.is_empty() || norm < 1e-10 {
        return Err(Error::Precondition(format!("no non-constant eigenvector in [{}, {}]", lambda - eps, lambda + eps)));
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// `‖Av − λv‖₂` for a unit vector `v`.
pub fn residual(g: &RegularGraph, v: &[f64], lambda: f64) -> Result<f64> {
    if v.len() != g.n() {
        return invalid(format!("vector has {} entries, graph has {} vertices", v.len(), g.n()));
    }
    let norm = dot(v, v).sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!("vector is not normalized (norm {norm})")));
    }
    Ok(pair_residual(g, v, lambda))
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub lambda: f64,
    pub eps: f64,
    pub lambda2: f64,
    pub residual: f64,
    pub entry_sum: f64,
    pub holds: bool,
}

/// Checks `|λ| ≤ λ₂ + ε` for a unit vector with zero entry sum and
/// residual at most `ε`.
pub fn almost_eig_bound_check(g: &RegularGraph, v: &[f64], lambda: f64, eps: f64, lambda2: f64) -> Result<BoundReport> {
    let entry_sum: f64 = v.iter().sum();
    if entry_sum.abs() > 1e-8 {
        return Err(Error::Precondition(format!("entry sum {entry_sum:e} is not zero")));
    }
    let r = residual(g, v, lambda)?;
    if r > eps + 1e-12 {
        return Err(Error::Precondition(format!("residual {r:e} exceeds ε = {eps:e}")));
    }
    Ok(BoundReport { lambda, eps, lambda2, residual: r, entry_sum, holds: lambda.abs() <= lambda2 + eps + 1e-6 })
}

/// Kesten-McKay density `d√(4(d−1)−x²) / (2π(d²−x²))`.
pub fn kesten_mckay_density(d: usize, x: f64) -> f64 {
    let d = d as f64;
    let s = 4.0 * (d - 1.0) - x * x;
    if s <= 0.0 {
        return 0.0;
    }
    d * s.sqrt() / (2.0 * std::f64::consts::PI * (d * d - x * x))
}

/// All eigenvalues of the adjacency matrix, ascending, without vectors.
pub fn dense_eigenvalues(g: &RegularGraph) -> Result<Vec<f64>> {
    if g.n() > DENSE_LIMIT {
        return invalid(format!("dense mode is limited to {DENSE_LIMIT} vertices, graph has {}", g.n()));
    }
    linalg::sym_eigenvalues(&adjacency_matrix(g))
}

/// Total variation between the binned spectrum (top eigenvalue removed) and
/// the Kesten-McKay law, on equal bins over its support. Eigenvalues outside
/// the support count fully toward the distance.
pub fn kesten_mckay_distance(sd: &SpectralData, bins: usize) -> Result<f64> {
    if sd.mode != SpectralMode::Dense {
        return invalid("Kesten-McKay comparison needs the dense spectrum");
    }
    kesten_mckay_distance_values(sd.d, &sd.eigenvalues, bins)
}

/// As [`kesten_mckay_distance`] on a full ascending spectrum.
pub fn kesten_mckay_distance_values(d: usize, eigenvalues: &[f64], bins: usize) -> Result<f64> {
    if bins == 0 || eigenvalues.len() < 2 {
        return invalid("need at least one bin and two eigenvalues");
    }
    let edge = 2.0 * ((d - 1) as f64).sqrt();
    let vals = &eigenvalues[..eigenvalues.len() - 1];
    let m = vals.len() as f64;
    let width = 2.0 * edge / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0usize;
    for &l in vals {
        if l < -edge || l > edge {
            outside += 1;
        } else {
            counts[(((l + edge) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let mut tv = outside as f64 / m;
    for (b, &c) in counts.iter().enumerate() {
        let lo = -edge + b as f64 * width;
        let mass = quadrature::integrate(|x| kesten_mckay_density(d, x), lo, lo + width, 1e-12).integral;
        tv += (c as f64 / m - mass).abs();
    }
    Ok(0.5 * tv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, disjoint_union, random_regular};

    #[test]
    fn complete_graph_spectrum() {
        let g = complete_graph(3);
        let sd = eigendecompose(&g, SpectralMode::Dense).unwrap();
        let want = [-1.0, -1.0, -1.0, 3.0];
        for (a, b) in sd.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((lambda2(&g).unwrap() - 1.0).abs() < 1e-10);
        assert!((lambda2_dense(&sd).unwrap() - 1.0).abs() < 1e-12);
        let ex = eigendecompose(&g, SpectralMode::Extreme).unwrap();
        assert!((ex.eigenvalues.last().unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn two_components_report_d() {
        let g = disjoint_union(&complete_graph(3), &complete_graph(3)).unwrap();
        assert!((lambda2(&g).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn density_value() {
        let v = kesten_mckay_density(3, 0.0);
        assert!((v - 3.0 * 8f64.sqrt() / (18.0 * std::f64::consts::PI)).abs() < 1e-15);
        let total = quadrature::integrate(|x| kesten_mckay_density(3, x), -8f64.sqrt(), 8f64.sqrt(), 1e-12).integral;
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dense_and_extreme_agree() {
        let mut r = StreamRng::seed_from_u64(3);
        let g = random_regular(600, 3, &mut r).unwrap();
        let de = eigendecompose(&g, SpectralMode::Dense).unwrap();
        let ex = eigendecompose(&g, SpectralMode::Extreme).unwrap();
        assert_eq!(ex.len(), 2 * EXTREME_PAIRS);
        for k in 0..EXTREME_PAIRS {
            assert!((de.eigenvalues[k] - ex.eigenvalues[k]).abs() < 1e-8);
            let (a, b) = (de.len() - 1 - k, ex.len() - 1 - k);
            assert!((de.eigenvalues[a] - ex.eigenvalues[b]).abs() < 1e-8);
        }
        assert!((lambda2(&g).unwrap() - lambda2_dense(&de).unwrap()).abs() < 1e-8);
        let top = de.vector(de.len() - 1);
        let top_ex = ex.vector(ex.len() - 1);
        assert!((dot(&top, &top_ex).abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn window_vectors() {
        let mut r = StreamRng::seed_from_u64(5);
        let g = random_regular(300, 3, &mut r).unwrap();
        let sd = eigendecompose(&g, SpectralMode::Dense).unwrap();
        let v = spectral_window_vector(&sd, 1.0, 0.1, &mut r).unwrap();
        assert!(v.iter().sum::<f64>().abs() < 1e-8);
        assert!(residual(&g, &v, 1.0).unwrap() <= 0.1);
        let l2 = lambda2_dense(&sd).unwrap();
        assert!(almost_eig_bound_check(&g, &v, 1.0, 0.1, l2).unwrap().holds);
        let shifted: Vec<f64> = {
            let mut w: Vec<f64> = v.iter().map(|x| x + 0.01).collect();
            let s = dot(&w, &w).sqrt();
            w.iter_mut().for_each(|x| *x /= s);
            w
        };
        assert!(matches!(almost_eig_bound_check(&g, &shifted, 1.0, 0.1, l2), Err(Error::Precondition(_))));
        assert!(spectral_window_vector(&sd, 3.0, 1e-9, &mut r).is_err());
        let c = vec![1.0 / (300f64).sqrt(); 300];
        assert!(residual(&g, &c, 3.0).unwrap() < 1e-12);
    }
}
