use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HotError, Result};
use crate::scalar::Scalar;
use crate::tensor::SparseTensor;

/// Undirected graph with node features.
///
/// `edges` holds every undirected edge in both directions, sorted and
/// without duplicates or self-loops. `edge_feat`, when present, is parallel
/// to `edges`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    node_feat: Vec<Vec<f64>>,
    edge_feat: Option<Vec<Vec<f64>>>,
    target: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    num_nodes: i64,
    edges: Vec<[i64; 2]>,
    node_feat: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_feat: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

impl Graph {
    /// Validates and symmetrizes. Returns the graph and the number of
    /// self-loops that were dropped.
    pub fn new(
        n: usize,
        edges: &[(i64, i64)],
        node_feat: Vec<Vec<f64>>,
        edge_feat: Option<Vec<Vec<f64>>>,
        target: Option<f64>,
    ) -> Result<(Self, usize)> {
        if n == 0 {
            return Err(HotError::Validation("graph has no nodes".into()));
        }
        if node_feat.len() != n {
            return Err(HotError::Validation(format!("{} node feature rows for {n} nodes", node_feat.len())));
        }
        let width = node_feat[0].len();
        if node_feat.iter().any(|r| r.len() != width) {
            return Err(HotError::Validation("node feature rows differ in width".into()));
        }
        if let Some(ef) = &edge_feat {
            if ef.len() != edges.len() {
                return Err(HotError::Validation(format!("{} edge feature rows for {} edges", ef.len(), edges.len())));
            }
            if ef.iter().any(|r| r.len() != ef.first().map_or(0, Vec::len)) {
                return Err(HotError::Validation("edge feature rows differ in width".into()));
            }
        }
        let mut loops = 0;
        // first occurrence of a directed pair keeps its feature row
        let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (e, &(u, v)) in edges.iter().enumerate() {
            for w in [u, v] {
                if w < 0 || w as usize >= n {
                    return Err(HotError::Validation(format!("edge ({u},{v}) references node {w} of {n}")));
                }
            }
            if u == v {
                loops += 1;
                continue;
            }
            let (u, v) = (u as usize, v as usize);
            pairs.entry((u, v)).or_insert(e);
            pairs.entry((v, u)).or_insert(e);
        }
        let edge_feat = edge_feat.map(|ef| pairs.values().map(|&e| ef[e].clone()).collect());
        let edges = pairs.into_keys().collect();
        Ok((Self { n, edges, node_feat, edge_feat, target }, loops))
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Directed edge list (each undirected edge appears twice).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.edges.len() / 2
    }

    pub fn node_feat(&self) -> &[Vec<f64>] {
        &self.node_feat
    }

    pub fn feat_width(&self) -> usize {
        self.node_feat[0].len()
    }

    pub fn edge_feat(&self) -> Option<&[Vec<f64>]> {
        self.edge_feat.as_deref()
    }

    pub fn target(&self) -> Option<f64> {
        self.target
    }

    /// Sorted neighbour lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
        }
        adj
    }

    /// `n × n` adjacency with value 1 on every directed edge.
    pub fn adjacency<T: Scalar>(&self) -> SparseTensor<T> {
        let coords = self.edges.iter().flat_map(|&(u, v)| [u as i64, v as i64]).collect();
        SparseTensor::from_coo(vec![self.n, self.n], vec![], coords, vec![T::one(); self.edges.len()])
            .expect("edges are validated")
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n || perm.iter().any(|&p| p >= self.n || std::mem::replace(&mut seen[p], true)) {
            return Err(HotError::Validation("not a permutation of the node set".into()));
        }
        let mut node_feat = vec![Vec::new(); self.n];
        for (i, row) in self.node_feat.iter().enumerate() {
            node_feat[perm[i]] = row.clone();
        }
        let edges: Vec<(i64, i64)> = self.edges.iter().map(|&(u, v)| (perm[u] as i64, perm[v] as i64)).collect();
        let (g, _) = Self::new(self.n, &edges, node_feat, self.edge_feat.clone(), self.target)?;
        Ok(g)
    }

    fn to_record(&self) -> GraphRecord {
        let keep: Vec<usize> = (0..self.edges.len()).filter(|&e| self.edges[e].0 < self.edges[e].1).collect();
        GraphRecord {
            num_nodes: self.n as i64,
            edges: keep.iter().map(|&e| [self.edges[e].0 as i64, self.edges[e].1 as i64]).collect(),
            node_feat: self.node_feat.clone(),
            edge_feat: self.edge_feat.as_ref().map(|ef| keep.iter().map(|&e| ef[e].clone()).collect()),
            y: self.target,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("graph records serialize")
    }

    /// Parses one JSONL line; `line` is only used for error messages.
    pub fn from_json_line(text: &str, line: usize) -> Result<(Self, usize)> {
        let rec: GraphRecord = serde_json::from_str(text).map_err(|e| HotError::Parse { line, msg: e.to_string() })?;
        if rec.num_nodes < 0 {
            return Err(HotError::Validation(format!("line {line}: negative num_nodes")));
        }
        let edges: Vec<(i64, i64)> = rec.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(rec.num_nodes as usize, &edges, rec.node_feat, rec.edge_feat, rec.y).map_err(|e| match e {
            HotError::Validation(m) => HotError::Validation(format!("line {line}: {m}")),
            other => other,
        })
    }
}

/// Reads a JSONL graph file. Blank lines are skipped.
pub fn load_graphs(path: impl AsRef<Path>) -> Result<Vec<Graph>> {
    read_graphs(BufReader::new(File::open(path)?))
}

pub fn read_graphs(reader: impl BufRead) -> Result<Vec<Graph>> {
    let mut graphs = Vec::new();
    let mut loops = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (g, dropped) = Graph::from_json_line(&line, i + 1)?;
        loops += dropped;
        graphs.push(g);
    }
    if loops > 0 {
        log::warn!("dropped {loops} self-loop(s) during ingestion");
    }
    Ok(graphs)
}

pub fn write_graphs(path: impl AsRef<Path>, graphs: &[Graph]) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for g in graphs {
        writeln!(out, "{}", g.to_json_line())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_path_graph() {
        let (g, loops) =
            Graph::from_json_line(r#"{"num_nodes":3,"edges":[[0,1],[1,2]],"node_feat":[[1],[1],[1]],"y":0.5}"#, 1)
                .unwrap();
        assert_eq!(loops, 0);
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert_eq!(g.target(), Some(0.5));
        assert_eq!(g.neighbors()[1], vec![0, 2]);
    }

    #[test]
    fn reversed_duplicate_is_one_edge() {
        let (g, _) = Graph::new(2, &[(0, 1), (1, 0)], vec![vec![0.0]; 2], None, None).unwrap();
        assert_eq!(g.num_undirected_edges(), 1);
    }

    #[test]
    fn self_loops_are_counted_and_dropped() {
        let (g, loops) = Graph::new(2, &[(0, 0), (0, 1)], vec![vec![0.0]; 2], None, None).unwrap();
        assert_eq!(loops, 1);
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn empty_graph_rejected() {
        let err = Graph::from_json_line(r#"{"num_nodes":0,"edges":[],"node_feat":[]}"#, 1).unwrap_err();
        assert!(matches!(err, HotError::Validation(_)));
    }

    #[test]
    fn out_of_range_and_malformed() {
        let err = Graph::from_json_line(r#"{"num_nodes":2,"edges":[[0,2]],"node_feat":[[1],[1]]}"#, 4).unwrap_err();
        assert!(matches!(err, HotError::Validation(ref m) if m.contains("line 4")));
        let text = "{\"num_nodes\":1,\"edges\":[],\"node_feat\":[[1]]}\n{oops\n";
        assert!(matches!(read_graphs(text.as_bytes()), Err(HotError::Parse { line: 2, .. })));
    }

    #[test]
    fn edge_features_follow_symmetrization() {
        let (g, _) =
            Graph::new(3, &[(2, 1), (0, 1)], vec![vec![0.0]; 3], Some(vec![vec![7.0], vec![5.0]]), None).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert_eq!(g.edge_feat().unwrap(), &[vec![5.0], vec![5.0], vec![7.0], vec![7.0]]);
    }

    #[test]
    fn json_round_trip() {
        let (g, _) = Graph::new(
            4,
            &[(0, 1), (1, 2), (3, 1)],
            vec![vec![1.0, 0.5], vec![2.0, 0.0], vec![3.0, 1.0], vec![0.0, 0.0]],
            Some(vec![vec![1.0], vec![2.0], vec![3.0]]),
            Some(-1.25),
        )
        .unwrap();
        let (back, _) = Graph::from_json_line(&g.to_json_line(), 1).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn permute_relabels() {
        let (g, _) = Graph::new(3, &[(0, 1)], vec![vec![0.0], vec![1.0], vec![2.0]], None, None).unwrap();
        let p = g.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.edges(), &[(0, 2), (2, 0)]);
        assert_eq!(p.node_feat(), &[vec![1.0], vec![2.0], vec![0.0]]);
        assert!(g.permute(&[0, 0, 1]).is_err());
    }
}
