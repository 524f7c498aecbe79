use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::data::Graph;
use crate::error::{HotError, Result};
use crate::tensor::SparseTensor;

/// Per-graph tuple sampler producing integer tuple annotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sampler {
    /// Ego-network of radius `hop` around every root; value is SPD to the root.
    KHop(u32),
    /// Root pairs `(i, j)` with `j ∈ {i} ∪ N(i)` over the hop-ball of `i`.
    I2(u32),
}

impl Sampler {
    pub fn hop(self) -> u32 {
        match self {
            Sampler::KHop(h) | Sampler::I2(h) => h,
        }
    }

    /// Tuple order of the produced tensor.
    pub fn order(self) -> usize {
        match self {
            Sampler::KHop(_) => 2,
            Sampler::I2(_) => 3,
        }
    }

    /// Exclusive upper bound on annotation values.
    pub fn num_annotations(self) -> usize {
        let h = self.hop() as usize;
        match self {
            Sampler::KHop(_) => h + 1,
            Sampler::I2(_) => (h + 1) * (h + 2),
        }
    }

    pub fn apply(self, g: &Graph) -> SparseTensor<i64> {
        match self {
            Sampler::KHop(h) => khop_sampler(g, h as usize),
            Sampler::I2(h) => i2_sampler(g, h as usize),
        }
    }

    pub(crate) fn tag(self) -> (u8, u32) {
        match self {
            Sampler::KHop(h) => (1, h),
            Sampler::I2(h) => (2, h),
        }
    }

    pub(crate) fn from_tag(kind: u8, hop: u32) -> Option<Self> {
        match (kind, hop) {
            (_, 0) => None,
            (1, h) => Some(Sampler::KHop(h)),
            (2, h) => Some(Sampler::I2(h)),
            _ => None,
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::KHop(h) => write!(f, "khop:{h}"),
            Sampler::I2(h) => write!(f, "i2:{h}"),
        }
    }
}

impl FromStr for Sampler {
    type Err = HotError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HotError::Config(format!("sampler `{s}` is not khop:H or i2:H with H >= 1"));
        let (kind, hop) = s.trim().split_once(':').ok_or_else(bad)?;
        let hop: u32 = hop.parse().map_err(|_| bad())?;
        if hop == 0 {
            return Err(bad());
        }
        match kind {
            "khop" => Ok(Sampler::KHop(hop)),
            "i2" => Ok(Sampler::I2(hop)),
            _ => Err(bad()),
        }
    }
}

/// BFS distances from `src`, not expanding past `limit`.
pub fn bfs_distances(adj: &[Vec<usize>], src: usize, limit: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        if d == limit {
            continue;
        }
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// `(n, n)` tensor with entry `(i, j) = SPD(i, j)` wherever `SPD(i, j) <= hop`.
pub fn khop_sampler(g: &Graph, hop: usize) -> SparseTensor<i64> {
    let n = g.num_nodes();
    let adj = g.neighbors();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        for (j, d) in bfs_distances(&adj, i, hop).into_iter().enumerate() {
            if let Some(d) = d {
                coords.extend([i as i64, j as i64]);
                values.push(d as i64);
            }
        }
    }
    SparseTensor::from_coo(vec![n, n], vec![], coords, values).expect("sampled indices are in range")
}

/// `(n, n, n)` tensor over `(i, j, k)` with `j ∈ {i} ∪ N(i)` and
/// `SPD(i, k) <= hop`. The value packs both distances as
/// `SPD(i,k) * (hop + 2) + min(SPD(j,k), hop + 1)`, unreachable counting as
/// `hop + 1`.
pub fn i2_sampler(g: &Graph, hop: usize) -> SparseTensor<i64> {
    let n = g.num_nodes();
    let adj = g.neighbors();
    let cap = hop + 1;
    let near: Vec<Vec<Option<usize>>> = (0..n).map(|j| bfs_distances(&adj, j, cap)).collect();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        let mut roots: Vec<usize> = adj[i].clone();
        roots.push(i);
        roots.sort_unstable();
        for &j in &roots {
            for k in 0..n {
                let Some(dik) = near[i][k].filter(|&d| d <= hop) else { continue };
                let djk = near[j][k].unwrap_or(cap).min(cap);
                coords.extend([i as i64, j as i64, k as i64]);
                values.push((dik * (hop + 2) + djk) as i64);
            }
        }
    }
    SparseTensor::from_coo(vec![n, n, n], vec![], coords, values).expect("sampled indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(i64, i64)]) -> Graph {
        Graph::new(n, edges, vec![vec![1.0]; n], None, None).unwrap().0
    }

    #[test]
    fn khop_path() {
        let t = khop_sampler(&graph(3, &[(0, 1), (1, 2)]), 1);
        let got: Vec<(Vec<i64>, i64)> = t.iter().map(|(i, v)| (i.to_vec(), v[0])).collect();
        let want = [
            (vec![0, 0], 0),
            (vec![0, 1], 1),
            (vec![1, 0], 1),
            (vec![1, 1], 0),
            (vec![1, 2], 1),
            (vec![2, 1], 1),
            (vec![2, 2], 0),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn khop_complete_graph() {
        let edges: Vec<(i64, i64)> = (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v))).collect();
        let t = khop_sampler(&graph(4, &edges), 1);
        assert_eq!(t.nnz(), 16);
        for (idx, v) in t.iter() {
            assert_eq!(v[0], i64::from(idx[0] != idx[1]));
        }
    }

    #[test]
    fn khop_isolated_node() {
        let t = khop_sampler(&graph(3, &[(0, 1)]), 2);
        assert_eq!(t.first_dim_range(2).len(), 1);
        assert_eq!(t.get(&[2, 2]), Some(&[0][..]));
    }

    #[test]
    fn i2_path_root_pair() {
        let t = i2_sampler(&graph(3, &[(0, 1), (1, 2)]), 1);
        let ks: Vec<i64> = t.iter().filter(|(i, _)| i[0] == 0 && i[1] == 1).map(|(i, _)| i[2]).collect();
        assert_eq!(ks, vec![0, 1]);
        // SPD(0,1) = 1, SPD(1,1) = 0
        assert_eq!(t.get(&[0, 1, 1]), Some(&[3][..]));
        // k = 2 is out of the ball of 0
        assert!(t.get(&[0, 1, 2]).is_none());
    }

    #[test]
    fn i2_single_edge_has_all_triples() {
        assert_eq!(i2_sampler(&graph(2, &[(0, 1)]), 1).nnz(), 8);
    }

    #[test]
    fn i2_isolated_node() {
        let t = i2_sampler(&graph(2, &[]), 1);
        assert_eq!(t.indices(), vec![vec![0, 1], vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn sampler_strings() {
        for s in [Sampler::KHop(2), Sampler::I2(1)] {
            assert_eq!(s.to_string().parse::<Sampler>().unwrap(), s);
        }
        for bad in ["khop", "khop:0", "ring:2", "i2:x"] {
            assert!(bad.parse::<Sampler>().is_err());
        }
    }
}
