//! Forward-only HOGNN architectures assembled from the graph operators.
//!
//! Every layer computes `H' = H + Σ_b MLP_b(branch_b(H))`, where the
//! branches are the operator compositions listed per architecture by
//! [`branches`]. SSWL instead feeds one MLP the concatenation
//! `[H, M1 H, M0 H]`, and PPGN contracts two MLP copies of `H` with a
//! channel-wise product before a third MLP. Weights are pseudo-random and
//! fixed by the seed; there is no training.

mod config;
mod params;

use std::fmt;

pub use config::{parse_representation, representation_name, Arch, ModelConfig, NormMode};
pub use params::{silu, stream, uniform_scaled, Linear, Mlp, Role, NORM_EPS};

use crate::backend::{self, Aggregator, Contribution, OutputPattern};
use crate::data::Batch;
use crate::error::{shape_err, HotError, Result};
use crate::graph_ops::{self, OpDim, PatternPolicy};
use crate::tensor::Tensor;

/// Size of the annotation embedding table.
pub const ANNOTATION_TABLE: usize = 64;

/// Readout aggregators: within each subgraph, then across subgraphs.
pub const READOUT: (Aggregator, Aggregator) = (Aggregator::Mean, Aggregator::Sum);

/// One graph operator: `M_d`, `P_d`, `U_d` or `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    M(usize),
    P(usize),
    U(usize),
    D,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::M(d) => write!(f, "M{d}"),
            Op::P(d) => write!(f, "P{d}"),
            Op::U(d) => write!(f, "U{d}"),
            Op::D => f.write_str("D"),
        }
    }
}

/// Writes a composition outermost-first, e.g. `U0∘M0∘P0`.
pub fn compose(ops: &[Op]) -> String {
    ops.iter().map(Op::to_string).collect::<Vec<_>>().join("∘")
}

/// Operator compositions of one layer, each outermost operator first.
pub fn branches(arch: Arch) -> Vec<Vec<Op>> {
    use Op::*;
    match arch {
        Arch::Ngnn | Arch::Drfwl | Arch::Ppgn | Arch::Ngat => vec![vec![M(1)]],
        Arch::Gnnak => vec![vec![M(1)], vec![U(0), P(0)], vec![U(1), P(1)]],
        Arch::Dssgnn => vec![vec![M(1)], vec![U(1), M(0), P(1)]],
        Arch::Sun => {
            vec![vec![M(1)], vec![U(0), D], vec![U(1), D], vec![U(0), P(0)], vec![U(1), P(1)], vec![U(0), M(0), P(0)]]
        }
        Arch::I2gnn => vec![vec![M(2)]],
        Arch::Sswl => vec![vec![M(1)], vec![M(0)]],
    }
}

/// Operators actually executed by one layer, grouped per branch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    branches: Vec<Vec<Op>>,
}

impl Trace {
    fn begin(&mut self) {
        self.branches.push(Vec::new());
    }

    /// Ops are executed innermost-first; stored outermost-first.
    fn record(&mut self, op: Op) {
        if let Some(b) = self.branches.last_mut() {
            b.insert(0, op);
        }
    }

    pub fn branches(&self) -> &[Vec<Op>] {
        &self.branches
    }

    /// Sorted composition strings: the layer's operator multiset.
    pub fn compositions(&self) -> Vec<String> {
        let mut v: Vec<String> = self.branches.iter().map(|b| compose(b)).collect();
        v.sort();
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayerParams {
    mlps: Vec<Mlp>,
    /// NGAT attention form, `hidden × hidden` row-major.
    bilinear: Option<Vec<f64>>,
}

/// Parameters and configuration of one model instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    cfg: ModelConfig,
    in_dim: usize,
    annotation: Vec<f64>,
    node_proj: Linear,
    layers: Vec<LayerParams>,
    head: Linear,
}

const OUTSIDE: usize = usize::MAX;

/// Per-forward context shared by the layers.
struct Ctx<'a> {
    batch: &'a Batch,
    adj: Tensor<f64>,
}

impl Model {
    pub fn new(cfg: ModelConfig, in_dim: usize) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.hidden;
        let s = cfg.seed;
        let annotation = uniform_scaled(&mut stream(s, OUTSIDE, Role::Annotation), ANNOTATION_TABLE * d, 1);
        let node_proj = Linear::seeded(&mut stream(s, OUTSIDE, Role::NodeProjection), in_dim, d, false);
        let head = Linear::seeded(&mut stream(s, OUTSIDE, Role::Head), d, 1, true);
        let layers = (0..cfg.num_layers)
            .map(|t| {
                let mlp = |k: usize, input: usize| Mlp::seeded(&mut stream(s, t, Role::Branch(k)), input, d, d);
                let mlps = match cfg.arch {
                    Arch::Sswl => vec![mlp(0, 3 * d)],
                    Arch::Ppgn => (0..3).map(|k| mlp(k, d)).collect(),
                    a => (0..branches(a).len()).map(|k| mlp(k, d)).collect(),
                };
                let bilinear =
                    (cfg.arch == Arch::Ngat).then(|| uniform_scaled(&mut stream(s, t, Role::Score), d * d, d));
                LayerParams { mlps, bilinear }
            })
            .collect();
        Ok(Self { cfg, in_dim, annotation, node_proj, layers, head })
    }

    /// Builds the model for the node feature width of `batch`.
    pub fn for_batch(cfg: ModelConfig, batch: &Batch) -> Result<Self> {
        let in_dim = match batch {
            Batch::Sparse(b) => b.x.dense_shape()[0],
            Batch::Dense(b) => b.x.dense_shape()[0],
        };
        Self::new(cfg, in_dim)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.representation() != self.cfg.representation {
            return Err(HotError::Config(format!(
                "batch is {} but the model is configured for {}",
                representation_name(batch.representation()),
                representation_name(self.cfg.representation)
            )));
        }
        if batch.tuple_order() != self.cfg.arch.tuple_order() {
            return Err(HotError::Rank(format!(
                "{} needs order-{} tuples, batch has order {}",
                self.cfg.arch,
                self.cfg.arch.tuple_order(),
                batch.tuple_order()
            )));
        }
        let in_dim = match batch {
            Batch::Sparse(b) => b.x.dense_shape()[0],
            Batch::Dense(b) => b.x.dense_shape()[0],
        };
        if in_dim != self.in_dim {
            return shape_err(format!("node features have width {in_dim}, model expects {}", self.in_dim));
        }
        Ok(())
    }

    /// `H⁰ = E[annotation] + U0(W x) + U1(W x)` on the sampled support. For
    /// order-3 tuples the node terms are taken at the first and last index.
    pub fn init_embedding(&self, batch: &Batch) -> Result<Tensor<f64>> {
        self.check_batch(batch)?;
        let d = self.cfg.hidden;
        let lookup = |a: i64| -> Result<&[f64]> {
            if a < 0 || a as usize >= ANNOTATION_TABLE {
                return Err(HotError::Range(format!("annotation {a} outside table of size {ANNOTATION_TABLE}")));
            }
            Ok(&self.annotation[a as usize * d..(a as usize + 1) * d])
        };
        let project = |rows: &mut dyn Iterator<Item = &[f64]>| -> Vec<f64> {
            let mut out = Vec::new();
            let mut buf = vec![0.0; d];
            for r in rows {
                self.node_proj.apply(r, &mut buf);
                out.extend_from_slice(&buf);
            }
            out
        };
        match batch {
            Batch::Sparse(b) => {
                let proj = project(&mut b.x.values().chunks_exact(self.in_dim.max(1)).take(b.num_nodes()));
                let proj = if self.in_dim == 0 { vec![0.0; b.num_nodes() * d] } else { proj };
                let t = &b.tuple;
                let last = t.sparse_dim() - 1;
                let mut values = Vec::with_capacity(t.nnz() * d);
                for (idx, ann) in t.iter() {
                    let e = lookup(ann[0])?;
                    let (i, k) = (idx[0] as usize, idx[last] as usize);
                    values.extend((0..d).map(|c| e[c] + proj[i * d + c] + proj[k * d + c]));
                }
                Ok(Tensor::Sparse(t.with_values(vec![d], values)?))
            }
            Batch::Dense(b) => {
                let nt = b.x.masked_shape()[1];
                let proj = if self.in_dim == 0 {
                    vec![0.0; b.x.num_positions() * d]
                } else {
                    project(&mut b.x.data().chunks_exact(self.in_dim))
                };
                let t = &b.tuple;
                let m = t.tuple_order();
                let per_graph = nt.pow(m as u32);
                let mut data = vec![0.0; t.num_positions() * d];
                for (pos, &valid) in t.mask().iter().enumerate() {
                    if !valid {
                        continue;
                    }
                    let e = lookup(t.row(pos)[0])?;
                    let g = pos / per_graph;
                    let local = pos % per_graph;
                    let i = g * nt + local / nt.pow(m as u32 - 1);
                    let k = g * nt + local % nt;
                    for c in 0..d {
                        data[pos * d + c] = e[c] + proj[i * d + c] + proj[k * d + c];
                    }
                }
                Ok(Tensor::Masked(t.with_data(vec![d], data)?))
            }
        }
    }

    fn pool_aggregator(&self) -> Aggregator {
        match self.cfg.aggregator {
            Aggregator::SoftmaxWeighted => Aggregator::Mean,
            a => a,
        }
    }

    fn op(&self, op: Op, x: &Tensor<f64>, h: &Tensor<f64>, layer: &LayerParams, ctx: &Ctx<'_>) -> Result<Tensor<f64>> {
        let policy = PatternPolicy::InputPattern;
        match op {
            Op::M(dim) => match (&layer.bilinear, x.tuple_order() == h.tuple_order()) {
                (Some(w), true) => {
                    let d = self.cfg.hidden;
                    let zero = vec![0.0; d];
                    let score = |c: &Contribution<'_, f64>| {
                        let target = x.get(c.out).unwrap_or(&zero);
                        let mut s = 0.0;
                        for (p, tp) in target.iter().enumerate() {
                            let row = &w[p * d..(p + 1) * d];
                            s += tp * row.iter().zip(c.left).map(|(a, b)| a * b).sum::<f64>();
                        }
                        s / d as f64
                    };
                    graph_ops::message_passing_scored(x, &ctx.adj, OpDim(dim), &score, policy)
                }
                _ => {
                    let agg =
                        if x.tuple_order() == h.tuple_order() { self.cfg.aggregator } else { self.pool_aggregator() };
                    graph_ops::message_passing(x, &ctx.adj, OpDim(dim), agg, policy)
                }
            },
            Op::P(dim) => graph_ops::pooling(x, OpDim(dim), self.pool_aggregator()),
            Op::U(dim) => graph_ops::unpooling(x, OpDim(dim), h),
            Op::D => graph_ops::diagonal(x),
        }
    }

    fn run_branch(
        &self,
        chain: &[Op],
        h: &Tensor<f64>,
        layer: &LayerParams,
        ctx: &Ctx<'_>,
        trace: &mut Option<&mut Trace>,
    ) -> Result<Tensor<f64>> {
        if let Some(t) = trace.as_deref_mut() {
            t.begin();
        }
        let mut x = h.clone();
        for &op in chain.iter().rev() {
            x = self.op(op, &x, h, layer, ctx)?;
            if let Some(t) = trace.as_deref_mut() {
                t.record(op);
            }
        }
        Ok(x)
    }

    /// One layer; when `trace` is given, every executed operator is logged.
    fn layer(&self, t: usize, h: &Tensor<f64>, ctx: &Ctx<'_>, mut trace: Option<&mut Trace>) -> Result<Tensor<f64>> {
        let layer = &self.layers[t];
        let delta = match self.cfg.arch {
            Arch::Sswl => {
                let m1 = self.run_branch(&[Op::M(1)], h, layer, ctx, &mut trace)?;
                let m0 = self.run_branch(&[Op::M(0)], h, layer, ctx, &mut trace)?;
                let cat = concat_rows(&[h, &m1, &m0])?;
                self.apply_mlp(&layer.mlps[0], &cat, ctx)?
            }
            Arch::Ppgn => {
                let a = self.apply_mlp(&layer.mlps[0], h, ctx)?;
                let b = self.apply_mlp(&layer.mlps[1], h, ctx)?;
                if let Some(tr) = trace.as_deref_mut() {
                    tr.begin();
                }
                let prod = support_product(&a, &b, h, self.cfg.aggregator)?;
                if let Some(tr) = trace.as_deref_mut() {
                    tr.record(Op::M(1));
                }
                self.apply_mlp(&layer.mlps[2], &prod, ctx)?
            }
            arch => {
                let mut acc: Option<Tensor<f64>> = None;
                for (k, chain) in branches(arch).iter().enumerate() {
                    let x = self.run_branch(chain, h, layer, ctx, &mut trace)?;
                    let y = self.apply_mlp(&layer.mlps[k], &x, ctx)?;
                    acc = Some(match acc {
                        None => y,
                        Some(a) => backend::add(&a, &y)?,
                    });
                }
                acc.expect("every architecture has a branch")
            }
        };
        backend::add(h, &delta)
    }

    /// `Linear → Norm → SiLU → Linear` on every existing tuple.
    fn apply_mlp(&self, mlp: &Mlp, x: &Tensor<f64>, ctx: &Ctx<'_>) -> Result<Tensor<f64>> {
        let lin = |l: &Linear, t: &Tensor<f64>| t.tuplewise_map(vec![l.output], |_, row, out| l.apply(row, out));
        let z = lin(&mlp.first, x)?;
        let stats = self.norm_stats(&z, ctx);
        let groups = row_groups(&z, ctx, self.cfg.norm);
        let mut buf = vec![0.0; mlp.first.output];
        z.tuplewise_map(vec![mlp.second.output], |e, row, out| {
            for (c, (b, &v)) in buf.iter_mut().zip(row).enumerate() {
                let v = match &stats {
                    Some((mean, inv)) => {
                        let g = groups[e];
                        (v - mean[g * row.len() + c]) * inv[g * row.len() + c]
                    }
                    None => v,
                };
                *b = silu(v);
            }
            mlp.second.apply(&buf, out);
        })
    }

    /// Per-group mean and inverse standard deviation over existing rows.
    fn norm_stats(&self, z: &Tensor<f64>, ctx: &Ctx<'_>) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.cfg.norm == NormMode::Off {
            return None;
        }
        let groups = row_groups(z, ctx, self.cfg.norm);
        let ng = groups.iter().copied().max().map_or(1, |g| g + 1);
        let w = z.row_len();
        let mut count = vec![0usize; ng];
        let mut mean = vec![0.0; ng * w];
        visit_rows(z, |e, row| {
            let g = groups[e];
            count[g] += 1;
            for (m, v) in mean[g * w..(g + 1) * w].iter_mut().zip(row) {
                *m += v;
            }
        });
        for g in 0..ng {
            for m in &mut mean[g * w..(g + 1) * w] {
                *m /= count[g].max(1) as f64;
            }
        }
        let mut var = vec![0.0; ng * w];
        visit_rows(z, |e, row| {
            let g = groups[e];
            for c in 0..w {
                let dv = row[c] - mean[g * w + c];
                var[g * w + c] += dv * dv;
            }
        });
        let inv = var
            .iter()
            .enumerate()
            .map(|(k, v)| 1.0 / (v / count[k / w.max(1)].max(1) as f64 + NORM_EPS).sqrt())
            .collect();
        Some((mean, inv))
    }

    fn context<'a>(&self, batch: &'a Batch) -> Ctx<'a> {
        let adj = match batch {
            Batch::Sparse(b) => Tensor::Sparse(b.adjacency.clone()),
            Batch::Dense(b) => Tensor::Masked(b.adjacency.clone()),
        };
        Ctx { batch, adj }
    }

    /// Applies layer `t` to `h`.
    pub fn layer_forward(
        &self,
        t: usize,
        h: &Tensor<f64>,
        batch: &Batch,
        trace: Option<&mut Trace>,
    ) -> Result<Tensor<f64>> {
        self.check_batch(batch)?;
        if t >= self.layers.len() {
            return Err(HotError::Config(format!("layer {t} of {}", self.layers.len())));
        }
        self.layer(t, h, &self.context(batch), trace)
    }

    /// Final tuple representations after all layers.
    pub fn encode(&self, batch: &Batch, mut traces: Option<&mut Vec<Trace>>) -> Result<Tensor<f64>> {
        let ctx = self.context(batch);
        let mut h = self.init_embedding(batch)?;
        for t in 0..self.layers.len() {
            let mut tr = Trace::default();
            h = self.layer(t, &h, &ctx, traces.is_some().then_some(&mut tr))?;
            if let Some(ts) = traces.as_deref_mut() {
                ts.push(tr);
            }
        }
        Ok(h)
    }

    /// One prediction per graph of `batch`.
    pub fn forward(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.predict(batch, None)
    }

    /// Like [`Model::forward`], also returning each layer's operator trace.
    pub fn forward_traced(&self, batch: &Batch) -> Result<(Vec<f64>, Vec<Trace>)> {
        let mut traces = Vec::new();
        let preds = self.predict(batch, Some(&mut traces))?;
        Ok((preds, traces))
    }

    fn predict(&self, batch: &Batch, traces: Option<&mut Vec<Trace>>) -> Result<Vec<f64>> {
        let h = self.encode(batch, traces)?;
        let emb = readout(&h, batch, READOUT.0, READOUT.1)?;
        let mut out = [0.0];
        Ok(emb
            .iter()
            .map(|g| {
                self.head.apply(g, &mut out);
                out[0]
            })
            .collect())
    }
}

/// Builds the model for `batch` and runs it.
pub fn forward(cfg: &ModelConfig, batch: &Batch) -> Result<Vec<f64>> {
    Model::for_batch(cfg.clone(), batch)?.forward(batch)
}

/// Group of every existing row, in storage order.
fn row_groups(t: &Tensor<f64>, ctx: &Ctx<'_>, mode: NormMode) -> Vec<usize> {
    let n = t.num_existing();
    if mode != NormMode::PerGraph {
        return vec![0; n];
    }
    match (t, ctx.batch) {
        (Tensor::Sparse(s), Batch::Sparse(b)) => (0..s.nnz()).map(|e| b.graph_ids[s.index(e)[0] as usize]).collect(),
        (Tensor::Masked(m), _) if m.batch_dims() == 1 => {
            let per_graph = m.num_positions() / m.masked_shape()[0].max(1);
            m.mask().iter().enumerate().filter(|(_, &v)| v).map(|(p, _)| p / per_graph).collect()
        }
        _ => vec![0; n],
    }
}

fn visit_rows<'t>(t: &'t Tensor<f64>, mut f: impl FnMut(usize, &'t [f64])) {
    match t {
        Tensor::Sparse(s) => (0..s.nnz()).for_each(|e| f(e, s.value(e))),
        Tensor::Masked(m) => {
            let mut e = 0;
            for (pos, &v) in m.mask().iter().enumerate() {
                if v {
                    f(e, m.row(pos));
                    e += 1;
                }
            }
        }
    }
}

/// Row-wise concatenation of tensors that share one support.
pub fn concat_rows(parts: &[&Tensor<f64>]) -> Result<Tensor<f64>> {
    let first = parts[0];
    for p in &parts[1..] {
        let same = match (first, p) {
            (Tensor::Sparse(a), Tensor::Sparse(b)) => a.same_pattern(b),
            (Tensor::Masked(a), Tensor::Masked(b)) => a.masked_shape() == b.masked_shape() && a.mask() == b.mask(),
            _ => false,
        };
        if !same {
            return shape_err("concat_rows: operands do not share a support");
        }
    }
    let mut rows: Vec<Vec<&[f64]>> = vec![Vec::new(); parts.len()];
    for (k, p) in parts.iter().enumerate() {
        visit_rows(p, |_, r| rows[k].push(r));
    }
    let width: usize = parts.iter().map(|p| p.row_len()).sum();
    first.tuplewise_map(vec![width], |e, _, out| {
        let mut off = 0;
        for r in &rows {
            out[off..off + r[e].len()].copy_from_slice(r[e]);
            off += r[e].len();
        }
    })
}

/// `out_ij = AGG_k a_ik ⊙ b_kj` on the support of `h`.
pub fn support_product(a: &Tensor<f64>, b: &Tensor<f64>, h: &Tensor<f64>, agg: Aggregator) -> Result<Tensor<f64>> {
    match h {
        Tensor::Sparse(hs) => {
            let pat = OutputPattern::of(hs);
            let out = backend::matmul(a, b, agg, Some(&pat))?;
            Ok(Tensor::Sparse(out.to_sparse().align_to(hs)?))
        }
        Tensor::Masked(hm) => {
            let out = backend::matmul(a, b, agg, None)?;
            Ok(Tensor::Masked(out.to_masked().with_mask(hm.mask().to_vec())?))
        }
    }
}

/// Pools every tuple dimension after the first with `inner`, then the root
/// dimension per graph with `outer`. Returns one row per graph.
pub fn readout(h: &Tensor<f64>, batch: &Batch, inner: Aggregator, outer: Aggregator) -> Result<Vec<Vec<f64>>> {
    if inner == Aggregator::SoftmaxWeighted || outer == Aggregator::SoftmaxWeighted {
        return Err(HotError::Unsupported("softmax-weighted readout".into()));
    }
    let mut x = h.clone();
    for dim in (1..h.tuple_order()).rev() {
        x = graph_ops::pooling(&x, OpDim(dim), inner)?;
    }
    let w = x.row_len();
    let ng = batch.num_graphs();
    match (&x, batch) {
        (Tensor::Sparse(nodes), Batch::Sparse(b)) => {
            let mut out = vec![vec![0.0; w]; ng];
            let mut count = vec![0usize; ng];
            for (idx, row) in nodes.iter() {
                let g = b.graph_ids[idx[0] as usize];
                fold(outer, &mut out[g], row, count[g] == 0);
                count[g] += 1;
            }
            for (row, &c) in out.iter_mut().zip(&count) {
                if outer == Aggregator::Mean && c > 0 {
                    row.iter_mut().for_each(|v| *v /= c as f64);
                }
            }
            Ok(out)
        }
        (Tensor::Masked(_), Batch::Dense(_)) => {
            let pooled = graph_ops::pooling(&x, OpDim(0), outer)?;
            let m = pooled.to_masked();
            Ok((0..ng).map(|g| m.row(g).to_vec()).collect())
        }
        _ => Err(HotError::Config("tuple tensor and batch use different representations".into())),
    }
}

fn fold(op: Aggregator, acc: &mut [f64], row: &[f64], first: bool) {
    for (a, &v) in acc.iter_mut().zip(row) {
        *a = if first {
            v
        } else {
            match op {
                Aggregator::Max => a.max(v),
                Aggregator::Min => a.min(v),
                _ => *a + v,
            }
        };
    }
}
