//! Invariant-subspace decomposition of the wave covariances on tree balls,
//! the closed-form eigenvalues `s₁..s₄`, the entropy difference `δ(k)` and
//! the 2-Markov check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::tree_ball::{ball_size, build_ball, eigenspace_dim, BallIndex, BallKind, Side};
use crate::wave::{covariance_matrix, distance_kernel_matrix, spherical_f, WaveParams};

/// Largest star ball handled by dense eigendecomposition in `delta_k`.
pub const DENSE_DELTA_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubspaceTag {
    /// The branch-contrast space hanging below a vertex.
    Ev(usize),
    /// Sphere-constant functions of a star ball.
    G,
    /// Level-constant functions of an edge ball, symmetric across the edge.
    G1,
    /// Level-constant functions of an edge ball, antisymmetric across the edge.
    G2,
}

#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub tag: SubspaceTag,
    pub columns: DMatrix<f64>,
}

/// Orthonormal contrasts on `b` items (Helmert), as `b-1` rows.
fn helmert(b: usize) -> Vec<Vec<f64>> {
    (1..b)
        .map(|m| {
            let norm = ((m * (m + 1)) as f64).sqrt();
            (0..b)
                .map(|i| match i.cmp(&m) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(m as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Branches of `v` used by its contrast space: its children, except that an
/// edge-ball root keeps only its own side.
fn branches(ball: &BallIndex, v: usize) -> &[usize] {
    &ball.children[v]
}

/// Number of contrast levels below `v` (zero means the zero subspace).
pub fn ev_levels(ball: &BallIndex, v: usize) -> usize {
    ball.max_depth().saturating_sub(ball.depth[v])
        * (!ball.boundary[v]) as usize
}

/// Expected dimension of a subspace.
pub fn subspace_dim(ball: &BallIndex, tag: SubspaceTag) -> Result<usize> {
    match (ball.kind, tag) {
        (_, SubspaceTag::Ev(v)) => {
            if v >= ball.len() {
                return invalid(format!("vertex {v} out of range"));
            }
            if ball.boundary[v] {
                return Ok(0);
            }
            Ok(ev_levels(ball, v) * (branches(ball, v).len() - 1))
        }
        (BallKind::Star, SubspaceTag::G) => Ok(ball.k + 2),
        (BallKind::Edge, SubspaceTag::G1 | SubspaceTag::G2) => Ok(ball.k + 1),
        _ => invalid(format!("tag {tag:?} does not apply to a {:?} ball", ball.kind)),
    }
}

pub fn subspace_basis(ball: &BallIndex, tag: SubspaceTag) -> Result<SubspaceBasis> {
    let dim = subspace_dim(ball, tag)?;
    let n = ball.len();
    let mut cols = DMatrix::zeros(n, dim);
    match tag {
        SubspaceTag::Ev(v) => {
            if dim > 0 {
                let br = branches(ball, v);
                let contrasts = helmert(br.len());
                let levels = ev_levels(ball, v);
                let base = ball.depth[v];
                // branch of each strict descendant
                let mut col = 0;
                for h in &contrasts {
                    for j in 1..=levels {
                        let size = ((ball.d - 1) as f64).powi(j as i32 - 1);
                        for u in 0..n {
                            if ball.depth[u] != base + j {
                                continue;
                            }
                            let mut a = u;
                            while ball.depth[a] > base + 1 {
                                a = ball.parent[a].unwrap();
                            }
                            if let Some(bi) = br.iter().position(|&c| c == a) {
                                cols[(u, col)] = h[bi] / size.sqrt();
                            }
                        }
                        col += 1;
                    }
                }
            }
        }
        SubspaceTag::G => {
            for u in 0..n {
                let dd = ball.depth[u];
                let size = if dd == 0 { 1.0 } else { (ball.d * (ball.d - 1).pow(dd as u32 - 1)) as f64 };
                cols[(u, dd)] = 1.0 / size.sqrt();
            }
        }
        SubspaceTag::G1 | SubspaceTag::G2 => {
            let sign = if tag == SubspaceTag::G1 { 1.0 } else { -1.0 };
            for u in 0..n {
                let dd = ball.depth[u];
                let size = 2.0 * ((ball.d - 1) as f64).powi(dd as i32);
                let s = if ball.vertices[u].side == Side::Plain { 1.0 } else { sign };
                cols[(u, dd)] = s / size.sqrt();
            }
        }
    }
    Ok(SubspaceBasis { tag, columns: cols })
}

/// Every subspace of the decomposition, the zero ones left out.
pub fn all_subspaces(ball: &BallIndex) -> Result<Vec<SubspaceBasis>> {
    let mut out = Vec::new();
    match ball.kind {
        BallKind::Star => out.push(subspace_basis(ball, SubspaceTag::G)?),
        BallKind::Edge => {
            out.push(subspace_basis(ball, SubspaceTag::G1)?);
            out.push(subspace_basis(ball, SubspaceTag::G2)?);
        }
    }
    for v in 0..ball.len() {
        if subspace_dim(ball, SubspaceTag::Ev(v))? > 0 {
            out.push(subspace_basis(ball, SubspaceTag::Ev(v))?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub subspaces: usize,
    /// Largest `‖(I−P)ΣQ‖_F / ‖Σ‖` over subspaces (bounds the invariance defect).
    pub invariance: f64,
    /// Largest `‖Q_iᵀ Q_j‖_F` over distinct pairs.
    pub orthogonality: f64,
    /// Largest `‖Q_iᵀ Q_i − I‖_F`.
    pub orthonormality: f64,
    pub dim_sum: usize,
    pub ball_size: usize,
    pub invariance_ok: bool,
    pub orthogonality_ok: bool,
    pub complete: bool,
}

impl DecompositionReport {
    pub fn passed(&self) -> bool {
        self.invariance_ok && self.orthogonality_ok && self.complete
    }
}

pub fn verify_decomposition(ball: &BallIndex, p: &WaveParams) -> Result<DecompositionReport> {
    let cov = covariance_matrix(ball, p)?;
    verify_decomposition_with(ball, &cov.entries)
}

/// Same checks against an arbitrary symmetric matrix.
pub fn verify_decomposition_with(ball: &BallIndex, sigma: &DMatrix<f64>) -> Result<DecompositionReport> {
    let subs = all_subspaces(ball)?;
    let dims: Vec<usize> = subs.iter().map(|s| s.columns.ncols()).collect();
    let total: usize = dims.iter().sum();
    let mut q = DMatrix::zeros(ball.len(), total);
    let mut off = 0;
    for s in &subs {
        q.columns_mut(off, s.columns.ncols()).copy_from(&s.columns);
        off += s.columns.ncols();
    }
    let norm = linalg::op_norm(sigma)?.max(f64::MIN_POSITIVE);
    let sq = sigma * &q;
    let gram = q.transpose() * &q;
    let qsq = q.transpose() * &sq;
    let mut invariance: f64 = 0.0;
    let mut orthogonality: f64 = 0.0;
    let mut orthonormality: f64 = 0.0;
    let mut oi = 0;
    for &di in &dims {
        let qi = q.columns(oi, di);
        let block = qsq.view((oi, oi), (di, di));
        let defect = sq.columns(oi, di) - qi * block;
        invariance = invariance.max(defect.norm() / norm);
        let g = gram.view((oi, oi), (di, di));
        orthonormality = orthonormality.max((g - DMatrix::identity(di, di)).norm());
        let mut oj = 0;
        for &dj in &dims {
            if oj != oi {
                orthogonality = orthogonality.max(gram.view((oi, oj), (di, dj)).norm());
            }
            oj += dj;
        }
        oi += di;
    }
    let expected_ok = subs
        .iter()
        .all(|s| subspace_dim(ball, s.tag).map(|d| d == s.columns.ncols()).unwrap_or(false));
    Ok(DecompositionReport {
        subspaces: subs.len(),
        invariance,
        orthogonality: orthogonality.max(orthonormality),
        orthonormality,
        dim_sum: total,
        ball_size: ball.len(),
        invariance_ok: invariance <= 1e-8,
        orthogonality_ok: orthogonality.max(orthonormality) <= 1e-10,
        complete: expected_ok && total == ball.len(),
    })
}

/// `l(j) = 1 + Σ_{i=1}^{j−1} (d−2)(d−1)^{i−1} f(2i)`.
pub fn l_value(j: usize, p: &WaveParams) -> f64 {
    let d = p.d as f64;
    1.0 + (1..j)
        .map(|i| (d - 2.0) * (d - 1.0).powi(i as i32 - 1) * spherical_f(2 * i, p))
        .sum::<f64>()
}

/// Closed-form nonzero eigenvalues of the covariance on the symmetric
/// subspaces. `r` is the radius around the root (star ball `B_{r−1}(C)`,
/// edge ball `B_{r−1}(e)`): `s₁` lives on the sphere functions, `s₂` on each
/// root contrast direction, `s₃`/`s₄` on the symmetric/antisymmetric level
/// functions of the edge ball.
pub fn eigenvalue_s(i: usize, r: usize, p: &WaveParams) -> Result<f64> {
    if r < 1 {
        return invalid("closed forms need r >= 1");
    }
    let d = p.d as f64;
    let dm = d - 1.0;
    let s1 = || 1.0 + (1..=r).map(|a| l_value(a, p) + dm.powi(a as i32) * spherical_f(2 * a, p)).sum::<f64>();
    match i {
        1 => Ok(s1()),
        2 => {
            let ls: f64 = (1..=r).map(|a| l_value(a, p)).sum();
            Ok((1.0 + d * ls - s1()) / dm)
        }
        3 | 4 => {
            let sign = if i == 3 { 1.0 } else { -1.0 };
            Ok((1..=r)
                .map(|j| l_value(j, p) + sign * dm.powi(j as i32 - 1) * spherical_f(2 * j - 1, p))
                .sum())
        }
        _ => invalid(format!("eigenvalue index {i} must be 1..=4")),
    }
}

/// Sum of the logs of the nonzero eigenvalues (those above `1e-8 λ_max`).
pub fn logdet_sp(m: &DMatrix<f64>, expected_rank: usize) -> Result<f64> {
    let ev = linalg::sym_eigenvalues(m)?;
    logdet_sp_values(&ev, expected_rank)
}

pub fn logdet_sp_values(ev: &[f64], expected_rank: usize) -> Result<f64> {
    let top = ev.iter().copied().fold(0.0, f64::max);
    let kept: Vec<f64> = ev.iter().copied().filter(|&l| l > 1e-8 * top).collect();
    if kept.len() != expected_rank {
        return Err(Error::RankMismatch { expected: expected_rank, found: kept.len() });
    }
    Ok(kept.iter().map(|l| l.ln()).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMethod {
    Dense,
    Reduced,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub d: usize,
    pub lambda: f64,
    pub k: usize,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    /// Numerical value: dense eigendecomposition when the ball is small
    /// enough, otherwise the reduced symmetric-block route.
    #[serde(rename = "delta_bruteforce")]
    pub delta: f64,
    pub delta_method: DeltaMethod,
    pub delta_reduced: f64,
    #[serde(rename = "delta_closed_form")]
    pub closed_form_delta: f64,
}

/// Closed-form `δ(k)` for the balls `B_k(C)`, `B_k(e)`.
pub fn delta_closed_form(p: &WaveParams, k: usize) -> Result<f64> {
    let r = k + 1;
    let d = p.d as f64;
    let s = |i| eigenvalue_s(i, r, p);
    let (s1, s2, s3, s4) = (s(1)?, s(2)?, s(3)?, s(4)?);
    if s1 <= 0.0 || s2 <= 0.0 || s3 <= 0.0 || s4 <= 0.0 {
        return Err(Error::Numerical(format!("nonpositive closed-form eigenvalue ({s1}, {s2}, {s3}, {s4})")));
    }
    Ok(s1.ln() + (d - 1.0) * s2.ln() - 0.5 * d * (s3.ln() + s4.ln()))
}

pub fn delta_dense(p: &WaveParams, k: usize) -> Result<f64> {
    let star = build_ball(BallKind::Star, p.d, k)?;
    let edge = build_ball(BallKind::Edge, p.d, k)?;
    let a = logdet_sp(&covariance_matrix(&star, p)?.entries, eigenspace_dim(BallKind::Star, p.d, k)?)?;
    let b = logdet_sp(&covariance_matrix(&edge, p)?.entries, eigenspace_dim(BallKind::Edge, p.d, k)?)?;
    Ok(a - 0.5 * p.d as f64 * b)
}

/// `(distance, count)` of the vertices at depth `j` seen from a fixed
/// vertex at depth `i`, in a rooted tree whose root has `rc` children and
/// whose other vertices have `d−1` children.
pub fn sphere_overlap(d: usize, rc: usize, i: usize, j: usize) -> Vec<(usize, f64)> {
    let dm = (d - 1) as f64;
    if i == 0 {
        let size = if j == 0 { 1.0 } else { rc as f64 * dm.powi(j as i32 - 1) };
        return vec![(j, size)];
    }
    let mut out = Vec::new();
    let mn = i.min(j);
    for m in 0..mn {
        let alt = if m == 0 { rc as f64 - 1.0 } else { dm - 1.0 };
        out.push((i + j - 2 * m, alt * dm.powi((j - m - 1) as i32)));
    }
    if j <= i {
        out.push((i - j, 1.0));
    } else {
        out.push((j - i, dm.powi((j - i) as i32)));
    }
    out
}

fn weighted_f(prof: &[(usize, f64)], f: &[f64]) -> f64 {
    prof.iter().map(|&(dist, c)| c * f[dist]).sum()
}

/// Quotient of the covariance on one branch-contrast direction with `levels`
/// levels. Identical for every vertex with that many levels below it.
fn contrast_block(d: usize, levels: usize, f: &[f64]) -> DMatrix<f64> {
    let n = |j: usize| ((d - 1) as f64).powi(j as i32 - 1);
    DMatrix::from_fn(levels, levels, |a, b| {
        let (i, j) = (a + 1, b + 1);
        let same = n(i) * weighted_f(&sphere_overlap(d, d - 1, i - 1, j - 1), f);
        (same - n(i) * n(j) * f[i + j]) / (n(i) * n(j)).sqrt()
    })
}

fn sphere_block(d: usize, levels: usize, f: &[f64]) -> DMatrix<f64> {
    let size = |j: usize| if j == 0 { 1.0 } else { (d * (d - 1).pow(j as u32 - 1)) as f64 };
    DMatrix::from_fn(levels, levels, |i, j| {
        (size(i) / size(j)).sqrt() * weighted_f(&sphere_overlap(d, d, i, j), f)
    })
}

fn edge_level_block(d: usize, levels: usize, sign: f64, f: &[f64]) -> DMatrix<f64> {
    let size = |j: usize| ((d - 1) as f64).powi(j as i32);
    DMatrix::from_fn(levels, levels, |i, j| {
        let same = weighted_f(&sphere_overlap(d, d - 1, i, j), f);
        let cross = size(j) * f[i + j + 1];
        (size(i) / size(j)).sqrt() * (same + sign * cross)
    })
}

/// `δ(k)` assembled from the eigenvalues of the small quotient matrices of
/// each symmetric block, weighted by how many copies of the block occur.
pub fn delta_reduced(p: &WaveParams, k: usize) -> Result<f64> {
    let d = p.d;
    let f: Vec<f64> = (0..=2 * k + 4).map(|j| spherical_f(j, p)).collect();
    let dm = (d - 1) as f64;
    // (eigenvalues, multiplicity) per block
    let mut star: Vec<(Vec<f64>, f64)> = vec![
        (linalg::sym_eigenvalues(&sphere_block(d, k + 2, &f))?, 1.0),
        (linalg::sym_eigenvalues(&contrast_block(d, k + 1, &f))?, dm),
    ];
    for depth in 1..=k {
        let copies = d as f64 * dm.powi(depth as i32 - 1) * (dm - 1.0);
        star.push((linalg::sym_eigenvalues(&contrast_block(d, k + 1 - depth, &f))?, copies));
    }
    let mut edge: Vec<(Vec<f64>, f64)> = vec![
        (linalg::sym_eigenvalues(&edge_level_block(d, k + 1, 1.0, &f))?, 1.0),
        (linalg::sym_eigenvalues(&edge_level_block(d, k + 1, -1.0, &f))?, 1.0),
    ];
    for len in 0..k {
        let copies = 2.0 * dm.powi(len as i32) * (dm - 1.0);
        edge.push((linalg::sym_eigenvalues(&contrast_block(d, k - len, &f))?, copies));
    }
    let side = |blocks: &[(Vec<f64>, f64)], expected: usize| -> Result<f64> {
        let top = blocks.iter().flat_map(|b| b.0.iter()).copied().fold(0.0, f64::max);
        let mut rank = 0.0;
        let mut sum = 0.0;
        for (ev, mult) in blocks {
            for &l in ev {
                if l > 1e-8 * top {
                    rank += mult;
                    sum += mult * l.ln();
                }
            }
        }
        if (rank - expected as f64).abs() > 0.5 {
            return Err(Error::RankMismatch { expected, found: rank.round() as usize });
        }
        Ok(sum)
    };
    let a = side(&star, eigenspace_dim(BallKind::Star, d, k)?)?;
    let b = side(&edge, eigenspace_dim(BallKind::Edge, d, k)?)?;
    Ok(a - 0.5 * d as f64 * b)
}

pub fn delta_k(p: &WaveParams, k: usize) -> Result<SpectrumReport> {
    p.check_spectrum()?;
    if k < 1 {
        return invalid("delta_k needs k >= 1");
    }
    let r = k + 1;
    let reduced = delta_reduced(p, k)?;
    let (delta, method) = if ball_size(BallKind::Star, p.d, k) <= DENSE_DELTA_LIMIT {
        (delta_dense(p, k)?, DeltaMethod::Dense)
    } else {
        (reduced, DeltaMethod::Reduced)
    };
    Ok(SpectrumReport {
        d: p.d,
        lambda: p.lambda,
        k,
        s1: eigenvalue_s(1, r, p)?,
        s2: eigenvalue_s(2, r, p)?,
        s3: eigenvalue_s(3, r, p)?,
        s4: eigenvalue_s(4, r, p)?,
        delta,
        delta_method: method,
        delta_reduced: reduced,
        closed_form_delta: delta_closed_form(p, k)?,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkovReport {
    pub k: usize,
    pub max_partial_covariance: f64,
    pub passed: bool,
}

/// Partial covariance of the two half-balls of `B_k(C)` across the edge
/// (root, first child), given the values on that edge.
pub fn conditional_independence_check(p: &WaveParams, k: usize) -> Result<MarkovReport> {
    p.check_spectrum()?;
    conditional_independence_with(p.d, k, |j| spherical_f(j, p))
}

/// Mixture of two geometric correlation functions. Each component is a
/// Markov field on the tree; the mixture is a valid covariance that is not
/// 2-Markov, which makes it a negative control for the check above.
pub fn mixed_geometric(j: usize) -> f64 {
    0.5 * (0.9f64.powi(j as i32) + (-0.5f64).powi(j as i32))
}

/// Same check for an arbitrary distance-correlation function.
pub fn conditional_independence_with(d: usize, k: usize, g: impl Fn(usize) -> f64) -> Result<MarkovReport> {
    if k < 1 {
        return invalid("conditional independence check needs k >= 1");
    }
    let ball = build_ball(BallKind::Star, d, k)?;
    let sigma = distance_kernel_matrix(&ball, g);
    let c1 = ball.children[0][0];
    let edge = [0, c1];
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for v in 0..ball.len() {
        if v == 0 || v == c1 {
            continue;
        }
        if ball.is_ancestor(c1, v) {
            right.push(v);
        } else {
            left.push(v);
        }
    }
    let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| sigma[(rows[i], cols[j])]);
    let see = sub(&edge, &edge);
    let ev = linalg::sym_eigenvalues(&see)?;
    if ev[0] <= 1e-10 * ev[1].abs().max(1e-300) {
        return Err(Error::Numerical(format!("edge block is singular (eigenvalues {ev:?})")));
    }
    let pinv = linalg::pinv_sym(&see, 1e-10)?;
    let partial = sub(&left, &right) - sub(&left, &edge) * pinv * sub(&edge, &right);
    let max = partial.amax();
    Ok(MarkovReport { k, max_partial_covariance: max, passed: max <= 1e-8 })
}

#[derive(Clone, Debug)]
pub struct QCoordinates {
    /// One linear functional per row, over the ball vertices.
    pub map: DMatrix<f64>,
    /// Row ranges of the blocks; block 0 is `B_p`.
    pub blocks: Vec<std::ops::Range<usize>>,
    /// Directed edge `(v, w)` behind each `A` block, in block order.
    pub directions: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QReport {
    pub coordinates: usize,
    pub dim_w: usize,
    pub max_cross_covariance: f64,
    pub rank: usize,
    pub uncorrelated: bool,
    pub spans: bool,
}

/// Difference coordinates at vertex `p`: the block `B_p = (X_v − X_p)_{v∼p}`
/// and for each edge `(v,w)` directed away from `p` with `w ≠ p` interior,
/// the block `A_{v,w} = (X_{w_i} − X_{w_{d−1}})_{i<d−1}` over the outer
/// neighbors of `w`.
pub fn q_coordinates(ball: &BallIndex, p: usize, params: &WaveParams) -> Result<(QCoordinates, QReport)> {
    if p >= ball.len() || ball.boundary[p] {
        return invalid(format!("vertex {p} must be an interior vertex"));
    }
    let n = ball.len();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut blocks = Vec::new();
    for &v in &ball.adjacency[p] {
        rows.push(vec![(v, 1.0), (p, -1.0)]);
    }
    blocks.push(0..rows.len());
    // directed edges away from p, found by BFS from p
    let mut directions = Vec::new();
    let mut queue = vec![(p, usize::MAX)];
    let mut head = 0;
    while head < queue.len() {
        let (x, from) = queue[head];
        head += 1;
        for &w in &ball.adjacency[x] {
            if w == from {
                continue;
            }
            queue.push((w, x));
            if !ball.boundary[w] {
                directions.push((x, w));
            }
        }
    }
    for &(v, w) in &directions {
        let outer: Vec<usize> = ball.adjacency[w].iter().copied().filter(|&u| u != v).collect();
        let last = *outer.last().unwrap();
        let start = rows.len();
        for &u in &outer[..outer.len() - 1] {
            rows.push(vec![(u, 1.0), (last, -1.0)]);
        }
        blocks.push(start..rows.len());
    }
    let mut map: DMatrix<f64> = DMatrix::zeros(rows.len(), n);
    for (r, row) in rows.iter().enumerate() {
        for &(c, x) in row {
            map[(r, c)] += x;
        }
    }
    let cov = crate::wave::distance_kernel_matrix(ball, |j| spherical_f(j, params));
    let qcov = &map * cov * map.transpose();
    let mut cross: f64 = 0.0;
    for (i, bi) in blocks.iter().enumerate() {
        for (j, bj) in blocks.iter().enumerate() {
            if i != j {
                cross = cross.max(qcov.view((bi.start, bj.start), (bi.len(), bj.len())).amax());
            }
        }
    }
    let ev = linalg::sym_eigenvalues(&qcov)?;
    let top = ev.last().copied().unwrap_or(0.0);
    let rank = ev.iter().filter(|&&l| l > 1e-8 * top).count();
    let dim_w = eigenspace_dim(ball.kind, ball.d, ball.k)?;
    let report = QReport {
        coordinates: rows.len(),
        dim_w,
        max_cross_covariance: cross,
        rank,
        uncorrelated: cross <= 1e-10,
        spans: rank == dim_w && rows.len() == dim_w,
    };
    Ok((QCoordinates { map, blocks, directions }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subspace_dims_examples() {
        let b = build_ball(BallKind::Star, 3, 2).unwrap();
        assert_eq!(subspace_dim(&b, SubspaceTag::Ev(0)).unwrap(), 6);
        assert_eq!(subspace_dim(&b, SubspaceTag::G).unwrap(), 4);
        let total: usize = all_subspaces(&b).unwrap().iter().map(|s| s.columns.ncols()).sum();
        assert_eq!(total, 22);
        assert!(subspace_dim(&b, SubspaceTag::G1).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let b = build_ball(BallKind::Star, 3, 2).unwrap();
        let p = WaveParams::new(3, 1.0).unwrap();
        assert!(verify_decomposition(&b, &p).unwrap().passed());
        let b = build_ball(BallKind::Star, 4, 1).unwrap();
        assert!(verify_decomposition(&b, &WaveParams::new(4, 0.0).unwrap()).unwrap().passed());
        let b = build_ball(BallKind::Star, 3, 2).unwrap();
        let mut s = covariance_matrix(&b, &WaveParams::new(3, 1.0).unwrap()).unwrap().entries;
        s[(0, 5)] += 0.1;
        s[(5, 0)] += 0.1;
        assert!(!verify_decomposition_with(&b, &s).unwrap().invariance_ok);
    }

    #[test]
    fn s_examples() {
        let p = WaveParams::new(3, 0.0).unwrap();
        assert!((eigenvalue_s(1, 1, &p).unwrap() - 1.0).abs() < 1e-14);
        assert!((eigenvalue_s(2, 1, &p).unwrap() - 1.5).abs() < 1e-14);
        for r in 1..10 {
            assert!((eigenvalue_s(3, r, &p).unwrap() - eigenvalue_s(4, r, &p).unwrap()).abs() < 1e-14);
        }
        assert!(eigenvalue_s(5, 1, &p).is_err());
    }

    #[test]
    fn logdet_examples() {
        assert!(logdet_sp(&DMatrix::identity(5, 5), 5).unwrap().abs() < 1e-14);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 0.0]));
        assert!((logdet_sp(&m, 2).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(matches!(logdet_sp(&m, 3), Err(Error::RankMismatch { .. })));
        let e = build_ball(BallKind::Edge, 3, 0).unwrap();
        let c = covariance_matrix(&e, &WaveParams::new(3, 1.0).unwrap()).unwrap();
        assert!((logdet_sp(&c.entries, 2).unwrap() - (8.0f64 / 9.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn overlap_counts_cover_spheres() {
        for (d, rc) in [(3, 3), (4, 3), (5, 5)] {
            for i in 0..5 {
                for j in 0..5 {
                    let total: f64 = sphere_overlap(d, rc, i, j).iter().map(|x| x.1).sum();
                    let size = if j == 0 { 1.0 } else { (rc * (d - 1).pow(j as u32 - 1)) as f64 };
                    assert_eq!(total, size);
                }
            }
        }
    }

    #[test]
    fn delta_routes_agree_small() {
        for lam in [0.0, 1.0, 2.5, 2.0 * 2f64.sqrt()] {
            let p = WaveParams::new(3, lam).unwrap();
            for k in 1..=4 {
                let rep = delta_k(&p, k).unwrap();
                assert!((rep.delta - rep.closed_form_delta).abs() < 1e-8, "{rep:?}");
                assert!((rep.delta_reduced - rep.closed_form_delta).abs() < 1e-8, "{rep:?}");
            }
        }
    }

    #[test]
    fn markov_examples() {
        let p = WaveParams::new(3, 1.0).unwrap();
        assert!(conditional_independence_check(&p, 2).unwrap().passed);
        assert!(conditional_independence_check(&WaveParams::new(3, 0.0).unwrap(), 1).unwrap().passed);
        // geometric correlations are themselves Markov on a tree
        assert!(conditional_independence_with(3, 2, |j| 0.9f64.powi(j as i32)).unwrap().passed);
        assert!(!conditional_independence_with(3, 2, mixed_geometric).unwrap().passed);
    }

    #[test]
    fn q_coordinates_root() {
        let b = build_ball(BallKind::Star, 3, 1).unwrap();
        let (q, rep) = q_coordinates(&b, 0, &WaveParams::new(3, 1.0).unwrap()).unwrap();
        assert_eq!(rep.coordinates, 6);
        assert_eq!(q.blocks.len(), 4);
        assert!(rep.uncorrelated && rep.spans, "{rep:?}");
        let near = WaveParams::new(3, 3.0 - 1e-6).unwrap();
        let (_, rep) = q_coordinates(&b, 0, &near).unwrap();
        assert!(rep.rank <= rep.coordinates);
    }
}
