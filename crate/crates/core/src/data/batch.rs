use crate::data::{Graph, PreprocessedGraph};
use crate::error::{HotError, Result};
use crate::scalar::Scalar;
use crate::tensor::{MaskedTensor, Representation, SparseTensor};

/// Block-diagonal batch: graph `g` owns node range
/// `node_offsets[g] .. node_offsets[g] + sizes[g]` in every tuple dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseBatch {
    pub adjacency: SparseTensor<f64>,
    /// `[N]` with one `d`-row per node.
    pub x: SparseTensor<f64>,
    pub tuple: SparseTensor<i64>,
    /// Present when every graph carries edge features of one width.
    pub edge_attr: Option<SparseTensor<f64>>,
    pub node_offsets: Vec<usize>,
    pub sizes: Vec<usize>,
    pub graph_ids: Vec<usize>,
    pub targets: Vec<Option<f64>>,
}

/// Pad-stack batch over `ñ = max n_i`. Axis 0 of every tensor is the graph
/// axis. `adjacency` is valid on edges only, `x` on each graph's node range,
/// `tuple` on the sampled support.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBatch {
    pub adjacency: MaskedTensor<f64>,
    pub x: MaskedTensor<f64>,
    pub tuple: MaskedTensor<i64>,
    pub sizes: Vec<usize>,
    pub targets: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Batch {
    Sparse(SparseBatch),
    Dense(DenseBatch),
}

impl Batch {
    pub fn collate(items: &[PreprocessedGraph], rep: Representation) -> Result<Self> {
        Ok(match rep {
            Representation::Sparse => Batch::Sparse(collate_sparse(items)?),
            Representation::Dense => Batch::Dense(collate_dense(items)?),
        })
    }

    pub fn representation(&self) -> Representation {
        match self {
            Batch::Sparse(_) => Representation::Sparse,
            Batch::Dense(_) => Representation::Dense,
        }
    }

    pub fn num_graphs(&self) -> usize {
        self.sizes().len()
    }

    pub fn sizes(&self) -> &[usize] {
        match self {
            Batch::Sparse(b) => &b.sizes,
            Batch::Dense(b) => &b.sizes,
        }
    }

    pub fn tuple_order(&self) -> usize {
        match self {
            Batch::Sparse(b) => b.tuple.sparse_dim(),
            Batch::Dense(b) => b.tuple.tuple_order(),
        }
    }
}

fn check_common(items: &[PreprocessedGraph]) -> Result<(usize, usize)> {
    let first = items.first().ok_or_else(|| HotError::Validation("cannot collate an empty list".into()))?;
    let d = first.graph.feat_width();
    let m = first.tuple_feature.sparse_dim();
    for it in items {
        if it.graph.feat_width() != d {
            return Err(HotError::Validation("node feature widths differ within a batch".into()));
        }
        if it.tuple_feature.sparse_dim() != m
            || it.tuple_feature.sparse_shape().iter().any(|&s| s != it.graph.num_nodes())
        {
            return Err(HotError::Validation("tuple tensors differ in order or do not match graph size".into()));
        }
    }
    Ok((d, m))
}

fn shifted<T: Scalar>(
    parts: impl Iterator<Item = (usize, SparseTensor<T>)>,
    total: usize,
    m: usize,
    dense: Vec<usize>,
) -> SparseTensor<T> {
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (off, t) in parts {
        coords.extend(t.coords().iter().map(|&c| c + off as i64));
        values.extend_from_slice(t.values());
    }
    SparseTensor::from_coo(vec![total; m], dense, coords, values).expect("blocks are in range")
}

pub fn collate_sparse(items: &[PreprocessedGraph]) -> Result<SparseBatch> {
    let (d, m) = check_common(items)?;
    let sizes: Vec<usize> = items.iter().map(|it| it.graph.num_nodes()).collect();
    let mut node_offsets = Vec::with_capacity(items.len());
    let mut total = 0;
    for &n in &sizes {
        node_offsets.push(total);
        total += n;
    }
    let graph_ids = sizes.iter().enumerate().flat_map(|(g, &n)| std::iter::repeat_n(g, n)).collect();
    let offs = || node_offsets.iter().copied();
    let adjacency = shifted(offs().zip(items.iter().map(|it| it.graph.adjacency::<f64>())), total, 2, vec![]);
    let tuple = shifted(offs().zip(items.iter().map(|it| it.tuple_feature.clone())), total, m, vec![]);
    let x = SparseTensor::from_coo(
        vec![total],
        vec![d],
        (0..total as i64).collect(),
        items.iter().flat_map(|it| it.graph.node_feat().iter().flatten().copied()).collect(),
    )?;
    let edge_width = items[0].graph.edge_feat().map(|ef| ef.first().map_or(0, Vec::len));
    let edge_attr = match edge_width {
        Some(w) if items.iter().all(|it| it.graph.edge_feat().is_some_and(|ef| ef.iter().all(|r| r.len() == w))) => {
            let mut coords = Vec::new();
            let mut values = Vec::new();
            for (off, it) in offs().zip(items) {
                for (&(u, v), row) in it.graph.edges().iter().zip(it.graph.edge_feat().unwrap()) {
                    coords.extend([(u + off) as i64, (v + off) as i64]);
                    values.extend_from_slice(row);
                }
            }
            Some(SparseTensor::from_coo(vec![total, total], vec![w], coords, values)?)
        }
        _ => None,
    };
    let targets = items.iter().map(|it| it.graph.target()).collect();
    Ok(SparseBatch { adjacency, x, tuple, edge_attr, node_offsets, sizes, graph_ids, targets })
}

/// Entries of a block-diagonal tensor inside `[lo, lo + n)` on every
/// dimension, re-indexed from zero.
pub fn slice_block<T: Scalar>(t: &SparseTensor<T>, lo: usize, n: usize) -> SparseTensor<T> {
    let sd = t.sparse_dim();
    let (lo, hi) = (lo as i64, (lo + n) as i64);
    let start = t.first_dim_range(lo).start;
    let end = if n == 0 { start } else { t.first_dim_range(hi - 1).end };
    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut nnz = 0;
    for e in start..end {
        let idx = t.index(e);
        if idx.iter().all(|&i| (lo..hi).contains(&i)) {
            coords.extend(idx.iter().map(|&i| i - lo));
            values.extend_from_slice(t.value(e));
            nnz += 1;
        }
    }
    SparseTensor::from_sorted_parts(vec![n; sd], t.dense_shape().to_vec(), nnz, coords, values)
}

impl SparseBatch {
    pub fn num_graphs(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.graph_ids.len()
    }

    /// Recovers graph `g` and its tuple tensor from the batch.
    pub fn item(&self, g: usize) -> Result<PreprocessedGraph> {
        let (lo, n) = (self.node_offsets[g], self.sizes[g]);
        let adj = slice_block(&self.adjacency, lo, n);
        let edges: Vec<(i64, i64)> = adj.iter().map(|(i, _)| (i[0], i[1])).collect();
        let node_feat = (lo..lo + n).map(|v| self.x.value(v).to_vec()).collect();
        let edge_feat =
            self.edge_attr.as_ref().map(|ea| slice_block(ea, lo, n).iter().map(|(_, r)| r.to_vec()).collect());
        let (graph, _) = Graph::new(n, &edges, node_feat, edge_feat, self.targets[g])?;
        Ok(PreprocessedGraph { graph, tuple_feature: slice_block(&self.tuple, lo, n) })
    }
}

pub fn collate_dense(items: &[PreprocessedGraph]) -> Result<DenseBatch> {
    let (d, m) = check_common(items)?;
    let b = items.len();
    let sizes: Vec<usize> = items.iter().map(|it| it.graph.num_nodes()).collect();
    let nt = *sizes.iter().max().unwrap();

    let mut a_data = vec![0.0; b * nt * nt];
    let mut a_mask = vec![false; b * nt * nt];
    let mut x_data = vec![0.0; b * nt * d];
    let mut x_mask = vec![false; b * nt];
    let per_graph = nt.pow(m as u32);
    let mut t_data = vec![0i64; b * per_graph];
    let mut t_mask = vec![false; b * per_graph];
    for (g, it) in items.iter().enumerate() {
        for &(u, v) in it.graph.edges() {
            let p = (g * nt + u) * nt + v;
            a_data[p] = 1.0;
            a_mask[p] = true;
        }
        for (v, row) in it.graph.node_feat().iter().enumerate() {
            x_mask[g * nt + v] = true;
            x_data[(g * nt + v) * d..(g * nt + v + 1) * d].copy_from_slice(row);
        }
        for (idx, val) in it.tuple_feature.iter() {
            let p = g * per_graph + idx.iter().fold(0, |acc, &i| acc * nt + i as usize);
            t_data[p] = val[0];
            t_mask[p] = true;
        }
    }
    let adjacency = MaskedTensor::new(vec![b, nt, nt], vec![], a_data, a_mask)?.with_batch_dims(1)?;
    let x = MaskedTensor::new(vec![b, nt], vec![d], x_data, x_mask)?.with_batch_dims(1)?;
    let mut tshape = vec![b];
    tshape.extend(std::iter::repeat_n(nt, m));
    let tuple = MaskedTensor::new(tshape, vec![], t_data, t_mask)?.with_batch_dims(1)?;
    let targets = items.iter().map(|it| it.graph.target()).collect();
    Ok(DenseBatch { adjacency, x, tuple, sizes, targets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sampler;

    fn item(n: usize, edges: &[(i64, i64)]) -> PreprocessedGraph {
        let feat = (0..n).map(|v| vec![v as f64, 1.0]).collect();
        let (g, _) = Graph::new(n, edges, feat, None, Some(n as f64)).unwrap();
        PreprocessedGraph::new(g, Sampler::KHop(1))
    }

    #[test]
    fn sparse_offsets() {
        let items = [item(2, &[(0, 1)]), item(3, &[(0, 1), (1, 2)])];
        let b = collate_sparse(&items).unwrap();
        assert_eq!(b.num_nodes(), 5);
        assert_eq!(b.node_offsets, vec![0, 2]);
        assert_eq!(b.graph_ids, vec![0, 0, 1, 1, 1]);
        assert_eq!(b.tuple.get(&[3, 3]), Some(&[0][..]));
        assert_eq!(b.tuple.get(&[3, 4]), Some(&[1][..]));
        assert!(b.tuple.get(&[1, 2]).is_none());
        assert_eq!(b.x.value(3), &[1.0, 1.0]);
        for (idx, _) in b.tuple.iter() {
            assert_eq!(b.graph_ids[idx[0] as usize], b.graph_ids[idx[1] as usize]);
        }
    }

    #[test]
    fn single_graph_batch_is_identity() {
        let it = item(3, &[(0, 2)]);
        let b = collate_sparse(std::slice::from_ref(&it)).unwrap();
        assert_eq!(b.node_offsets, vec![0]);
        assert_eq!(b.tuple, it.tuple_feature);
        assert_eq!(b.adjacency, it.graph.adjacency());
    }

    #[test]
    fn slicing_recovers_items() {
        let mut items = vec![item(2, &[(0, 1)]), item(1, &[]), item(4, &[(0, 1), (2, 3), (3, 1)])];
        let (g, _) = Graph::new(2, &[(0, 1)], vec![vec![0.0, 0.0]; 2], Some(vec![vec![4.0]]), None).unwrap();
        items.push(PreprocessedGraph::new(g, Sampler::KHop(1)));
        let b = collate_sparse(&items).unwrap();
        assert!(b.edge_attr.is_none());
        for (i, it) in items.iter().enumerate().take(3) {
            assert_eq!(&b.item(i).unwrap(), it);
        }
        assert_eq!(b.item(3).unwrap().tuple_feature, items[3].tuple_feature);
    }

    #[test]
    fn edge_attr_round_trip() {
        let mk = |w: f64| {
            let (g, _) = Graph::new(2, &[(0, 1)], vec![vec![0.0]; 2], Some(vec![vec![w, 1.0]]), None).unwrap();
            PreprocessedGraph::new(g, Sampler::KHop(1))
        };
        let items = [mk(2.0), mk(3.0)];
        let b = collate_sparse(&items).unwrap();
        assert_eq!(b.edge_attr.as_ref().unwrap().get(&[3, 2]), Some(&[3.0, 1.0][..]));
        assert_eq!(b.item(1).unwrap(), items[1]);
    }

    #[test]
    fn i2_blocks() {
        let (g, _) = Graph::new(2, &[(0, 1)], vec![vec![0.0]; 2], None, None).unwrap();
        let it = PreprocessedGraph::new(g, Sampler::I2(1));
        let b = collate_sparse(&[it.clone(), it.clone()]).unwrap();
        assert_eq!(b.tuple.nnz(), 16);
        assert_eq!(b.item(1).unwrap(), it);
    }

    #[test]
    fn dense_padding() {
        let items = [item(2, &[(0, 1)]), item(3, &[(0, 1), (1, 2)])];
        let b = collate_dense(&items).unwrap();
        assert_eq!(b.adjacency.masked_shape(), &[2, 3, 3]);
        assert_eq!(b.adjacency.batch_dims(), 1);
        assert_eq!(b.x.mask(), &[true, true, false, true, true, true]);
        for i in 0..3 {
            for j in 0..3 {
                let in_range = i < 2 && j < 2;
                assert_eq!(b.tuple.get(&[0, i, j]).is_some(), in_range);
            }
        }
        assert_eq!(b.adjacency.get(&[1, 1, 2]), Some(&[1.0][..]));
        assert!(b.adjacency.get(&[1, 0, 2]).is_none());
    }

    #[test]
    fn dense_equal_sizes_no_padding() {
        let items = [item(2, &[(0, 1)]), item(2, &[])];
        let b = collate_dense(&items).unwrap();
        assert_eq!(b.tuple.masked_shape(), &[2, 2, 2]);
        assert_eq!(b.x.count_valid(), 4);
    }

    #[test]
    fn empty_list_rejected() {
        assert!(collate_sparse(&[]).is_err());
        assert!(collate_dense(&[]).is_err());
    }
}
