//! Finite balls of the d-regular tree with genealogical labels: the star
//! ball `B_k(C)` (radius `k+1` around a root) and the edge ball `B_k(e)`
//! (radius `k` around each endpoint of a distinguished edge).

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg;

/// Largest ball we are willing to materialize.
pub const MAX_BALL_VERTICES: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BallKind {
    Star,
    Edge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Plain,
    Primed,
}

/// Genealogical label: a side marker plus the branch indices from the
/// root. Digits are 1-based; the first digit of a star-ball label ranges
/// over `1..=d`, every other digit over `1..=d-1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub side: Side,
    pub digits: Vec<u32>,
}

impl Label {
    pub fn root() -> Self {
        Label { side: Side::Plain, digits: vec![] }
    }

    pub fn primed_root() -> Self {
        Label { side: Side::Primed, digits: vec![] }
    }

    pub fn new(side: Side, digits: &[u32]) -> Self {
        Label { side, digits: digits.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            write!(f, "0")?;
        } else {
            for (i, d) in self.digits.iter().enumerate() {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{d}")?;
            }
        }
        if self.side == Side::Primed {
            write!(f, "'")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BallIndex {
    pub kind: BallKind,
    pub d: usize,
    pub k: usize,
    pub vertices: Vec<Label>,
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<usize>,
    pub adjacency: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
    pub boundary: Vec<bool>,
    lookup: HashMap<Label, usize>,
}

/// `|B_k(C)| = 1 + Σ_{j≤k} d(d-1)^j`, `|B_k(e)| = 2 Σ_{j≤k} (d-1)^j`.
pub fn ball_size(kind: BallKind, d: usize, k: usize) -> usize {
    let mut s = 0usize;
    let mut p = 1usize;
    for _ in 0..=k {
        s += p;
        p *= d - 1;
    }
    match kind {
        BallKind::Star => 1 + d * s,
        BallKind::Edge => 2 * s,
    }
}

/// Number of vertices at maximal depth.
pub fn boundary_size(kind: BallKind, d: usize, k: usize) -> usize {
    eigenspace_dim_unchecked(kind, d, k)
}

fn eigenspace_dim_unchecked(kind: BallKind, d: usize, k: usize) -> usize {
    let p = (d - 1).pow(k as u32);
    match kind {
        BallKind::Star => d * p,
        BallKind::Edge => 2 * p,
    }
}

fn check_params(d: usize, _k: usize) -> Result<()> {
    if d < 3 {
        return invalid(format!("degree d={d} must be at least 3"));
    }
    Ok(())
}

/// Dimension of `W_λ(S)`, which equals the boundary size.
pub fn eigenspace_dim(kind: BallKind, d: usize, k: usize) -> Result<usize> {
    check_params(d, k)?;
    Ok(eigenspace_dim_unchecked(kind, d, k))
}

pub fn build_ball(kind: BallKind, d: usize, k: usize) -> Result<BallIndex> {
    check_params(d, k)?;
    let size = ball_size(kind, d, k);
    if size > MAX_BALL_VERTICES {
        return invalid(format!("ball with {size} vertices is too large"));
    }
    let max_depth = match kind {
        BallKind::Star => k + 1,
        BallKind::Edge => k,
    };
    let mut vertices = Vec::with_capacity(size);
    let mut parent = Vec::with_capacity(size);
    let mut depth = Vec::with_capacity(size);
    let mut children: Vec<Vec<usize>> = Vec::with_capacity(size);

    let mut level: Vec<usize> = Vec::new();
    match kind {
        BallKind::Star => {
            vertices.push(Label::root());
            parent.push(None);
            depth.push(0);
            children.push(vec![]);
            level.push(0);
        }
        BallKind::Edge => {
            for lab in [Label::root(), Label::primed_root()] {
                level.push(vertices.len());
                vertices.push(lab);
                parent.push(None);
                depth.push(0);
                children.push(vec![]);
            }
        }
    }
    for dep in 1..=max_depth {
        let mut next = Vec::new();
        for &v in &level {
            let branches = if kind == BallKind::Star && dep == 1 { d } else { d - 1 };
            for b in 1..=branches as u32 {
                let mut lab = vertices[v].clone();
                lab.digits.push(b);
                let id = vertices.len();
                vertices.push(lab);
                parent.push(Some(v));
                depth.push(dep);
                children.push(vec![]);
                children[v].push(id);
                next.push(id);
            }
        }
        level = next;
    }
    debug_assert_eq!(vertices.len(), size);

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); size];
    for v in 0..size {
        if let Some(p) = parent[v] {
            adjacency[v].push(p);
        }
        adjacency[v].extend_from_slice(&children[v]);
    }
    if kind == BallKind::Edge {
        adjacency[0].insert(0, 1);
        adjacency[1].insert(0, 0);
    }
    let boundary = depth.iter().map(|&x| x == max_depth).collect();
    let lookup = vertices.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
    Ok(BallIndex { kind, d, k, vertices, parent, depth, adjacency, children, boundary, lookup })
}

impl BallIndex {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        match self.kind {
            BallKind::Star => self.k + 1,
            BallKind::Edge => self.k,
        }
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&v| !self.boundary[v])
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    pub fn index_of(&self, label: &Label) -> Option<usize> {
        self.lookup.get(label).copied()
    }

    /// Roots: the single center of a star ball, both ends of an edge ball.
    pub fn roots(&self) -> &[usize] {
        match self.kind {
            BallKind::Star => &[0],
            BallKind::Edge => &[0, 1],
        }
    }

    /// True when `anc` lies on the path from `v` up to its root (inclusive).
    pub fn is_ancestor(&self, anc: usize, mut v: usize) -> bool {
        loop {
            if v == anc {
                return true;
            }
            match self.parent[v] {
                Some(p) if self.depth[p] >= self.depth[anc] => v = p,
                _ => return false,
            }
        }
    }

    pub fn distance(&self, u: usize, v: usize) -> Result<usize> {
        if u >= self.len() || v >= self.len() {
            return invalid(format!("vertex index out of range ({u}, {v}) for ball of size {}", self.len()));
        }
        Ok(self.distance_unchecked(u, v))
    }

    pub(crate) fn distance_unchecked(&self, mut u: usize, mut v: usize) -> usize {
        let mut acc = 0;
        while self.depth[u] > self.depth[v] {
            u = self.parent[u].unwrap();
            acc += 1;
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v].unwrap();
            acc += 1;
        }
        while u != v {
            match (self.parent[u], self.parent[v]) {
                (Some(pu), Some(pv)) => {
                    u = pu;
                    v = pv;
                    acc += 2;
                }
                // the two distinct roots of an edge ball
                _ => return acc + 1,
            }
        }
        acc
    }

    /// All-pairs distance table, row-major.
    pub fn distance_table(&self) -> Vec<u32> {
        let n = self.len();
        let mut out = vec![0u32; n * n];
        let mut queue = Vec::with_capacity(n);
        for s in 0..n {
            let row = &mut out[s * n..(s + 1) * n];
            row.fill(u32::MAX);
            row[s] = 0;
            queue.clear();
            queue.push(s);
            let mut head = 0;
            while head < queue.len() {
                let x = queue[head];
                head += 1;
                for &y in &self.adjacency[x] {
                    if row[y] == u32::MAX {
                        row[y] = row[x] + 1;
                        queue.push(y);
                    }
                }
            }
        }
        out
    }

    /// Stacked interior constraints `λ f(v) − Σ_{w∼v} f(w) = 0`, one row
    /// per interior vertex.
    pub fn constraint_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let interior: Vec<usize> = self.interior().collect();
        let mut m = DMatrix::zeros(interior.len(), self.len());
        for (r, &v) in interior.iter().enumerate() {
            m[(r, v)] = lambda;
            for &w in &self.adjacency[v] {
                m[(r, w)] -= 1.0;
            }
        }
        m
    }

    /// Max-abs interior residual of `λ f(v) − Σ_{w∼v} f(w)`.
    pub fn interior_residual(&self, lambda: f64, f: &[f64]) -> f64 {
        self.interior()
            .map(|v| {
                let s: f64 = self.adjacency[v].iter().map(|&w| f[w]).sum();
                (lambda * f[v] - s).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Index map placing the edge ball `B_j(e)` inside this star ball, with
    /// the distinguished edge sent to (root, child 1).
    pub fn embed_edge_ball(&self, edge: &BallIndex) -> Result<Vec<usize>> {
        if self.kind != BallKind::Star || edge.kind != BallKind::Edge || edge.d != self.d {
            return invalid("embedding needs a star ball and an edge ball of equal degree");
        }
        if edge.k > self.k {
            return invalid(format!("edge ball radius {} exceeds star ball radius {}", edge.k, self.k));
        }
        edge.vertices
            .iter()
            .map(|lab| {
                let digits: Vec<u32> = match lab.side {
                    Side::Plain => {
                        let mut v = lab.digits.clone();
                        if let Some(first) = v.first_mut() {
                            *first += 1;
                        }
                        v
                    }
                    Side::Primed => std::iter::once(1).chain(lab.digits.iter().copied()).collect(),
                };
                self.index_of(&Label::new(Side::Plain, &digits))
                    .ok_or_else(|| crate::error::Error::Numerical(format!("label {lab} has no image")))
            })
            .collect()
    }
}

/// Orthonormal basis of `W_λ(S)` as the null space of the interior
/// constraints.
pub fn eigenspace_basis(ball: &BallIndex, lambda: f64) -> Result<DMatrix<f64>> {
    linalg::null_space(&ball.constraint_matrix(lambda), 1e-10)
}

/// Dimension of the numerical null space of the interior constraints,
/// computed from singular values only.
pub fn null_space_rank(ball: &BallIndex, lambda: f64) -> Result<usize> {
    let c = ball.constraint_matrix(lambda);
    Ok(ball.len() - linalg::numeric_rank(&c, 1e-10)?)
}

/// Basis of `W_λ(S)` by outward extension: the roots and all children of
/// an interior vertex except its last one are free; the last child is
/// forced by the equation at its parent. Columns are not orthonormal.
pub fn greedy_eigenspace_basis(ball: &BallIndex, lambda: f64) -> DMatrix<f64> {
    let n = ball.len();
    let mut free = Vec::new();
    free.extend_from_slice(ball.roots());
    for v in 0..n {
        if !ball.boundary[v] {
            let ch = &ball.children[v];
            free.extend_from_slice(&ch[..ch.len() - 1]);
        }
    }
    let mut out = DMatrix::zeros(n, free.len());
    let mut f = vec![0.0; n];
    for (col, &fv) in free.iter().enumerate() {
        f.fill(0.0);
        f[fv] = 1.0;
        for v in 0..n {
            if ball.boundary[v] {
                continue;
            }
            let last = *ball.children[v].last().unwrap();
            let s: f64 = ball.adjacency[v].iter().filter(|&&w| w != last).map(|&w| f[w]).sum();
            f[last] = lambda * f[v] - s;
        }
        for i in 0..n {
            out[(i, col)] = f[i];
        }
    }
    out
}
