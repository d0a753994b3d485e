//! Simple d-regular graphs: uniform generation through the pairing model,
//! short-cycle statistics and the edge-list text format.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGraph {
    n: usize,
    d: usize,
    adj: Vec<Vec<usize>>,
    connected: bool,
}

impl RegularGraph {
    /// Validates and wraps adjacency lists (sorted on the way in).
    pub fn from_adjacency(d: usize, mut adj: Vec<Vec<usize>>) -> Result<Self> {
        let n = adj.len();
        for (v, nb) in adj.iter_mut().enumerate() {
            nb.sort_unstable();
            if nb.len() != d {
                return invalid(format!("vertex {v} has degree {}, expected {d}", nb.len()));
            }
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return invalid(format!("vertex {v} has a multi-edge"));
            }
            if nb.iter().any(|&u| u == v || u >= n) {
                return invalid(format!("vertex {v} has a loop or out-of-range neighbor"));
            }
        }
        for v in 0..n {
            for &u in &adj[v] {
                if adj[u].binary_search(&v).is_err() {
                    return invalid(format!("edge {v}-{u} is not symmetric"));
                }
            }
        }
        let mut g = RegularGraph { n, d, adj, connected: false };
        g.connected = n == 0 || g.bfs_distances(0, usize::MAX).iter().all(|&x| x != usize::MAX);
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for &v in &self.adj[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.adj.iter().map(|nb| nb.iter().map(|&u| x[u]).sum()).collect()
    }

    /// Graph distances from `src`, `usize::MAX` beyond `max_depth`.
    pub fn bfs_distances(&self, src: usize, max_depth: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[src] = 0;
        let mut q = VecDeque::from([src]);
        while let Some(x) = q.pop_front() {
            if dist[x] >= max_depth {
                continue;
            }
            for &y in &self.adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    q.push_back(y);
                }
            }
        }
        dist
    }

    /// Vertices within distance `r` of `src`, with their distances.
    pub fn bfs_ball(&self, src: usize, r: usize) -> Vec<(usize, usize)> {
        let mut out = vec![(src, 0)];
        let mut seen = std::collections::HashSet::from([src]);
        let mut head = 0;
        while head < out.len() {
            let (x, dx) = out[head];
            head += 1;
            if dx == r {
                continue;
            }
            for &y in &self.adj[x] {
                if seen.insert(y) {
                    out.push((y, dx + 1));
                }
            }
        }
        out
    }

    /// Length of the shortest cycle through `v`, if at most `max_len`.
    pub fn shortest_cycle_through(&self, v: usize, max_len: usize) -> Option<usize> {
        // BFS tree rooted at v; each vertex remembers which neighbor of v
        // its tree path starts with. A non-tree edge between two branches
        // closes a cycle through v.
        let mut order: Vec<(usize, usize, usize)> = vec![(v, 0, usize::MAX)];
        let mut seen = std::collections::HashMap::from([(v, (0usize, usize::MAX))]);
        let mut best: Option<usize> = None;
        let half = max_len / 2 + 1;
        let mut head = 0;
        while head < order.len() {
            let (x, dx, bx) = order[head];
            head += 1;
            if dx >= half {
                break;
            }
            if let Some(b) = best {
                if 2 * dx + 1 >= b {
                    break;
                }
            }
            for &y in &self.adj[x] {
                match seen.get(&y) {
                    None => {
                        let by = if x == v { y } else { bx };
                        seen.insert(y, (dx + 1, by));
                        order.push((y, dx + 1, by));
                    }
                    Some(&(dy, by)) => {
                        if y != v && by != bx && bx != usize::MAX {
                            let len = dx + dy + 1;
                            if len <= max_len && best.is_none_or(|b| len < b) {
                                best = Some(len);
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// Shortest cycle length through each vertex, capped at `max_len`.
    pub fn cycle_profile(&self, max_len: usize) -> Vec<Option<usize>> {
        use rayon::prelude::*;
        (0..self.n).into_par_iter().map(|v| self.shortest_cycle_through(v, max_len)).collect()
    }
}

/// One pass of the pairing model: stubs are matched one by one and the pass
/// is abandoned at the first loop or repeated edge. Restarting from scratch
/// on failure keeps the result uniform over simple graphs.
pub fn pairing_attempt<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Option<RegularGraph> {
    let m = n * d;
    let mut stubs: Vec<usize> = (0..m).map(|s| s / d).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(d); n];
    let mut live = m;
    while live > 0 {
        // match the last live stub with a uniform other live stub
        let a = stubs[live - 1];
        let j = rng.random_range(0..live - 1);
        let b = stubs[j];
        if a == b || adj[a].contains(&b) {
            return None;
        }
        adj[a].push(b);
        adj[b].push(a);
        stubs.swap(j, live - 2);
        live -= 2;
    }
    RegularGraph::from_adjacency(d, adj).ok()
}

fn check_gen(n: usize, d: usize) -> Result<()> {
    if d < 1 {
        return invalid("degree must be positive");
    }
    if !(n * d).is_multiple_of(2) {
        return invalid(format!("n*d = {} must be even", n * d));
    }
    if n <= d {
        return invalid(format!("need n > d, got n={n}, d={d}"));
    }
    Ok(())
}

pub fn random_regular<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<RegularGraph> {
    random_regular_with_cap(n, d, DEFAULT_MAX_ATTEMPTS, rng)
}

pub fn random_regular_with_cap<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<RegularGraph> {
    check_gen(n, d)?;
    for _ in 0..max_attempts {
        if let Some(g) = pairing_attempt(n, d, rng) {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!("no simple pairing in {max_attempts} attempts (n={n}, d={d})")))
}

/// Upper-bound estimate of the essential girth measure: the smallest `ε`
/// on the candidate grid such that at most an `ε` fraction of vertices lie
/// on a cycle of length `≤ ⌊1/ε⌋`. Cycle lengths above `l_max` are not
/// examined, so the result is at least `1/(l_max+1)`.
pub fn essential_girth_omega(g: &RegularGraph, l_max: usize) -> Result<f64> {
    if l_max < 3 {
        return invalid("l_max must be at least 3");
    }
    let profile = g.cycle_profile(l_max);
    let n = g.n() as f64;
    let mut counts = vec![0usize; l_max + 1];
    for len in profile.into_iter().flatten() {
        counts[len] += 1;
    }
    let mut best = 1.0 / 3.0; // cycles of length <= 2 never occur
    let mut cum = 0usize;
    for (l, &c) in counts.iter().enumerate().skip(3) {
        cum += c;
        let frac = cum as f64 / n;
        let cand = frac.max(1.0 / (l as f64 + 1.0));
        if cand <= 1.0 / l as f64 && cand < best {
            best = cand;
        }
    }
    Ok(best)
}

/// Writes `n d`, then one `u v` line per edge with `u < v`.
pub fn save_edge_list<W: Write>(g: &RegularGraph, mut sink: W) -> Result<()> {
    writeln!(sink, "{} {}", g.n, g.d)?;
    for (u, v) in g.edges() {
        writeln!(sink, "{u} {v}")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn load_edge_list<R: BufRead>(source: R) -> Result<RegularGraph> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = source.lines().enumerate();
    let (n, d) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(perr(1, "missing header".into()));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            [a, b] => match (a.parse::<usize>(), b.parse::<usize>()) {
                (Ok(n), Ok(d)) => break (n, d),
                _ => return Err(perr(i + 1, format!("malformed header '{line}'"))),
            },
            _ => return Err(perr(i + 1, format!("malformed header '{line}'"))),
        }
    };
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut last_line = 1;
    for (i, line) in lines {
        let line = line?;
        last_line = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let (u, v) = match f.as_slice() {
            [a, b] => match (a.parse::<usize>(), b.parse::<usize>()) {
                (Ok(u), Ok(v)) => (u, v),
                _ => return Err(perr(i + 1, format!("malformed edge '{line}'"))),
            },
            _ => return Err(perr(i + 1, format!("malformed edge '{line}'"))),
        };
        if u >= n || v >= n {
            return Err(perr(i + 1, format!("vertex out of range in '{line}'")));
        }
        if u == v {
            return Err(perr(i + 1, format!("self-loop at {u}")));
        }
        if adj[u].contains(&v) {
            return Err(perr(i + 1, format!("duplicate edge {u} {v}")));
        }
        adj[u].push(v);
        adj[v].push(u);
    }
    if let Some(v) = (0..n).find(|&v| adj[v].len() != d) {
        return Err(perr(last_line, format!("degree violation: vertex {v} has degree {}, expected {d}", adj[v].len())));
    }
    RegularGraph::from_adjacency(d, adj).map_err(|e| perr(last_line, e.to_string()))
}

/// The complete graph on `d+1` vertices.
pub fn complete_graph(d: usize) -> RegularGraph {
    let adj = (0..=d).map(|v| (0..=d).filter(|&u| u != v).collect()).collect();
    RegularGraph::from_adjacency(d, adj).unwrap()
}

/// Disjoint union of two graphs of equal degree.
pub fn disjoint_union(a: &RegularGraph, b: &RegularGraph) -> Result<RegularGraph> {
    if a.d != b.d {
        return invalid("degrees differ");
    }
    let mut adj = a.adj.clone();
    adj.extend(b.adj.iter().map(|nb| nb.iter().map(|&u| u + a.n).collect()));
    RegularGraph::from_adjacency(a.d, adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_random_graph() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let g = random_regular(10, 3, &mut r).unwrap();
        assert_eq!(g.edge_count(), 15);
        assert!((0..10).all(|v| g.neighbors(v).len() == 3));
        let h = random_regular(10, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(g, h);
        assert!(random_regular(7, 3, &mut r).is_err());
        assert!(random_regular(3, 3, &mut r).is_err());
    }

    #[test]
    fn k4_cycles() {
        let g = complete_graph(3);
        assert!((0..4).all(|v| g.shortest_cycle_through(v, 10) == Some(3)));
        assert!(essential_girth_omega(&g, 10).unwrap() >= 1.0 / 3.0);
    }

    #[test]
    fn cube_has_girth_four() {
        let adj = (0..8usize).map(|v| (0..3).map(|b| v ^ (1 << b)).collect()).collect();
        let g = RegularGraph::from_adjacency(3, adj).unwrap();
        assert!((0..8).all(|v| g.shortest_cycle_through(v, 10) == Some(4)));
        assert_eq!(g.shortest_cycle_through(0, 3), None);
    }

    #[test]
    fn petersen_girth_five() {
        let mut adj = vec![Vec::new(); 10];
        let mut add = |a: usize, b: usize| {
            adj[a].push(b);
            adj[b].push(a);
        };
        for i in 0..5 {
            add(i, (i + 1) % 5);
            add(i, i + 5);
            add(5 + i, 5 + (i + 2) % 5);
        }
        let g = RegularGraph::from_adjacency(3, adj).unwrap();
        assert!((0..10).all(|v| g.shortest_cycle_through(v, 12) == Some(5)));
        // every vertex on a 5-cycle, none shorter: best candidate is L=4
        assert!((essential_girth_omega(&g, 12).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let g = random_regular(30, 4, &mut r).unwrap();
        let mut buf = Vec::new();
        save_edge_list(&g, &mut buf).unwrap();
        assert_eq!(load_edge_list(&buf[..]).unwrap(), g);
        let dup = "4 3\n0 1\n0 1\n";
        assert!(matches!(load_edge_list(dup.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let bad_deg = "4 3\n0 1\n0 2\n0 3\n1 2\n1 3\n";
        let e = load_edge_list(bad_deg.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("degree violation"));
        assert!(load_edge_list("4 3\n0 x\n".as_bytes()).is_err());
    }

    #[test]
    fn union_is_disconnected() {
        let g = disjoint_union(&complete_graph(3), &complete_graph(3)).unwrap();
        assert!(!g.is_connected());
        assert!(complete_graph(3).is_connected());
    }
}
