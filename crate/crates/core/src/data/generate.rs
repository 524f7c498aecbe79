//! Seeded synthetic graph families.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Graph;
use crate::error::{HotError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Er,
    Regular,
    Path,
    ZincLike,
}

impl FromStr for GraphKind {
    type Err = HotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "er" => Ok(GraphKind::Er),
            "regular" => Ok(GraphKind::Regular),
            "path" => Ok(GraphKind::Path),
            "zinc-like" => Ok(GraphKind::ZincLike),
            other => Err(HotError::Config(format!("unknown graph kind `{other}`"))),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Er => "er",
            GraphKind::Regular => "regular",
            GraphKind::Path => "path",
            GraphKind::ZincLike => "zinc-like",
        })
    }
}

/// Number of categorical node labels drawn by the random families.
pub const NODE_LABELS: usize = 4;

fn build(n: usize, edges: &[(i64, i64)], node_feat: Vec<Vec<f64>>, edge_feat: Option<Vec<Vec<f64>>>, y: f64) -> Graph {
    Graph::new(n, edges, node_feat, edge_feat, Some(y)).expect("generated graphs are valid").0
}

fn labels(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| vec![rng.gen_range(0..NODE_LABELS) as f64]).collect()
}

/// Path `0 - 1 - ... - (n-1)` with all-ones features; target is `n`.
pub fn path_graph(n: usize) -> Graph {
    let edges: Vec<(i64, i64)> = (1..n as i64).map(|v| (v - 1, v)).collect();
    build(n, &edges, vec![vec![1.0]; n], None, n as f64)
}

/// Erdős–Rényi `G(n, p)`.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n as i64 {
        for v in u + 1..n as i64 {
            if rng.gen_bool(p.clamp(0.0, 1.0)) {
                edges.push((u, v));
            }
        }
    }
    let feat = labels(n, rng);
    let y = rng.gen_range(-1.0..1.0);
    build(n, &edges, feat, None, y)
}

/// `degree`-regular circulant graph under a random relabeling. The degree is
/// clamped to `n - 1` and lowered by one when `n * degree` is odd.
pub fn random_regular(n: usize, degree: usize, rng: &mut impl Rng) -> Graph {
    let mut d = degree.min(n.saturating_sub(1));
    if (n * d) % 2 == 1 {
        d -= 1;
    }
    let mut perm: Vec<i64> = (0..n as i64).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for k in 1..=d / 2 {
            edges.push((perm[i], perm[(i + k) % n]));
        }
        if d % 2 == 1 {
            edges.push((perm[i], perm[(i + n / 2) % n]));
        }
    }
    let feat = labels(n, rng);
    let y = rng.gen_range(-1.0..1.0);
    build(n, &edges, feat, None, y)
}

/// Molecule-like graph: a random tree with maximum degree 4 and a few ring
/// closures, 10 to 38 nodes, categorical atom and bond labels.
pub fn zinc_like(rng: &mut impl Rng) -> Graph {
    zinc_like_sized(rng.gen_range(10..=38), rng)
}

pub fn zinc_like_sized(n: usize, rng: &mut impl Rng) -> Graph {
    const MAX_DEG: usize = 4;
    let mut deg = vec![0usize; n];
    let mut edges: Vec<(i64, i64)> = Vec::new();
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| deg[u] < MAX_DEG).collect();
        let u = *open.choose(rng).unwrap_or(&(v - 1));
        deg[u] += 1;
        deg[v] += 1;
        edges.push((u as i64, v as i64));
    }
    for _ in 0..n / 8 {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        let dup = edges.iter().any(|&(a, b)| (a, b) == (u as i64, v as i64) || (b, a) == (u as i64, v as i64));
        if u != v && !dup && deg[u] < MAX_DEG && deg[v] < MAX_DEG {
            deg[u] += 1;
            deg[v] += 1;
            edges.push((u as i64, v as i64));
        }
    }
    let feat = (0..n).map(|_| vec![rng.gen_range(0..9) as f64]).collect();
    let bonds = edges.iter().map(|_| vec![rng.gen_range(0..3) as f64]).collect();
    let y = rng.gen_range(-3.0..3.0);
    build(n, &edges, feat, Some(bonds), y)
}

#[derive(Clone, Copy, Debug)]
pub struct GenParams {
    pub kind: GraphKind,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Edge probability for `er`; defaults to an expected degree of 3.
    pub density: Option<f64>,
    pub degree: usize,
}

/// `count` graphs; graph sizes are uniform in the node range except for
/// `zinc-like`, which draws its own.
pub fn generate(params: &GenParams, count: usize, rng: &mut impl Rng) -> Vec<Graph> {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(params.min_nodes..=params.max_nodes.max(params.min_nodes)).max(1);
            match params.kind {
                GraphKind::Path => path_graph(n),
                GraphKind::Er => {
                    let p = params.density.unwrap_or(if n > 1 { 3.0 / (n - 1) as f64 } else { 0.0 });
                    erdos_renyi(n, p, rng)
                }
                GraphKind::Regular => random_regular(n, params.degree, rng),
                GraphKind::ZincLike => zinc_like(rng),
            }
        })
        .collect()
}
