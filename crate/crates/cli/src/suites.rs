//! Oracle suites run by `hot verify` and the acceptance tests.

use std::fmt;

use hot_core::backend::{self, OutputPattern};
use hot_core::data::{collate_sparse, khop_sampler, preprocess, Batch, Graph, PreprocessedGraph, Sampler};
use hot_core::graph_ops::{diagonal, message_passing, pooling, unpooling, OpDim, PatternPolicy};
use hot_core::model::{Arch, Model, ModelConfig, NormMode};
use hot_core::{Aggregator, Representation, Scalar, SparseTensor, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::{self, close, Dense};

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Largest relative error seen, for float suites.
    pub max_rel_err: Option<f64>,
}

impl SuiteReport {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), cases: 0, failures: Vec::new(), max_rel_err: None }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 20 {
            self.failures.push(msg);
        } else if self.failures.len() == 20 {
            self.failures.push("...".into());
        }
    }

    fn track(&mut self, a: f64, b: f64) {
        let e = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let e = if a == b { 0.0 } else { e };
        self.max_rel_err = Some(self.max_rel_err.map_or(e, |m| m.max(e)));
    }

    pub fn merge_from(&mut self, other: SuiteReport) {
        self.cases += other.cases;
        for f in other.failures {
            self.fail(format!("{}: {f}", other.name));
        }
        if let Some(e) = other.max_rel_err {
            self.max_rel_err = Some(self.max_rel_err.map_or(e, |m| m.max(e)));
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {} cases, {} failures", self.name, self.cases, self.failures.len())?;
        if let Some(e) = self.max_rel_err {
            write!(f, ", max rel err {e:.3e}")?;
        }
        for msg in self.failures.iter().take(5) {
            write!(f, "\n    {msg}")?;
        }
        Ok(())
    }
}

fn to_tensor<T: Scalar>(d: &Dense<T>, masked: bool) -> Tensor<T> {
    let mut entries = Vec::new();
    for (p, c) in d.cells.iter().enumerate() {
        if let Some(v) = c {
            let mut idx = vec![0i64; d.shape.len()];
            let mut rem = p;
            for k in (0..d.shape.len()).rev() {
                idx[k] = (rem % d.shape[k]) as i64;
                rem /= d.shape[k];
            }
            entries.push((idx, vec![*v]));
        }
    }
    let s = SparseTensor::from_entries(d.shape.clone(), vec![], entries).expect("oracle cells are in range");
    if masked {
        Tensor::Masked(s.to_masked())
    } else {
        Tensor::Sparse(s)
    }
}

fn random_dense<T: Scalar>(
    rng: &mut ChaCha8Rng,
    shape: Vec<usize>,
    density: f64,
    gen: &dyn Fn(&mut ChaCha8Rng) -> T,
) -> Dense<T> {
    let len: usize = shape.iter().product();
    let cells = (0..len).map(|_| rng.gen_bool(density).then(|| gen(rng))).collect();
    Dense { shape, cells }
}

pub const DENSITIES: [f64; 3] = [0.1, 0.3, 1.0];
pub const KERNEL_AGGREGATORS: [Aggregator; 4] = [Aggregator::Sum, Aggregator::Mean, Aggregator::Max, Aggregator::Min];

/// Random operand pairs through matmul (with and without output pattern),
/// add, reduce and expand on sparse, masked and mixed routes. Integer cases
/// must match exactly, float cases within `rel_tol`.
pub fn kernels(seed: u64, cases: usize, max_n: usize, rel_tol: f64) -> SuiteReport {
    let mut rep = SuiteReport::new("kernels");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in 0..cases {
        let density = DENSITIES[c % 3];
        let agg = KERNEL_AGGREGATORS[(c / 3) % 4];
        let route = (c / 12) % 3;
        let shape = [rng.gen_range(1..=max_n), rng.gen_range(1..=max_n), rng.gen_range(1..=max_n)];
        let r = if c % 2 == 0 {
            kernel_case::<i64>(&mut rng, shape, density, agg, route, &|r| r.gen_range(-5..=5), 0.0)
        } else {
            kernel_case::<f64>(&mut rng, shape, density, agg, route, &|r| r.gen_range(-2.0..2.0), rel_tol)
        };
        rep.cases += 1;
        if let Err(e) = r {
            rep.fail(format!("case {c} ({agg}, density {density}, route {route}, shape {shape:?}): {e}"));
        }
    }
    rep
}

fn kernel_case<T: Scalar>(
    rng: &mut ChaCha8Rng,
    [n, m, p]: [usize; 3],
    density: f64,
    agg: Aggregator,
    route: usize,
    gen: &dyn Fn(&mut ChaCha8Rng) -> T,
    tol: f64,
) -> Result<(), String> {
    let a = random_dense(rng, vec![n, m], density, gen);
    let b = random_dense(rng, vec![m, p], density, gen);
    let a2 = random_dense(rng, vec![n, m], density, gen);
    let pat = random_dense(rng, vec![n, p], 0.5, gen);
    let (ma, mb) = match route {
        0 => (false, false),
        1 => (true, true),
        _ => (false, true),
    };
    let (ta, tb) = (to_tensor(&a, ma), to_tensor(&b, mb));
    let err = |what: &str, e: String| format!("{what}: {e}");
    let kerr = |e: hot_core::HotError| e.to_string();

    // coalescing and representation round trip
    let sa = ta.to_sparse();
    if sa.to_masked().to_sparse() != sa || sa.check_invariants().is_err() {
        return Err("sparse/masked round trip changed the tensor".into());
    }

    let got = backend::matmul(&ta, &tb, agg, None).map_err(kerr)?;
    oracle::compare(&Dense::of(&got), &oracle::matmul(&a, &b, agg, None), tol).map_err(|e| err("matmul", e))?;

    let pattern_src = pat_tensor(&pat);
    let op = OutputPattern::of(&pattern_src);
    let (pa, pb) = if route == 1 {
        (Tensor::Sparse(ta.to_sparse()), Tensor::Sparse(tb.to_sparse()))
    } else {
        (ta.clone(), tb.clone())
    };
    let got = backend::matmul(&pa, &pb, agg, Some(&op)).map_err(kerr)?;
    oracle::compare(&Dense::of(&got), &oracle::matmul(&a, &b, agg, Some(&pat)), tol)
        .map_err(|e| err("matmul with pattern", e))?;

    let got = backend::add(&ta, &to_tensor(&a2, mb)).map_err(kerr)?;
    oracle::compare(&Dense::of(&got), &oracle::add(&a, &a2), tol).map_err(|e| err("add", e))?;

    for dim in 0..2 {
        let got = backend::reduce(&ta, dim, agg).map_err(kerr)?;
        oracle::compare(&Dense::of(&got), &oracle::reduce(&a, dim, agg), tol).map_err(|e| err("reduce", e))?;

        let len = if dim == 0 { m } else { n };
        let v = random_dense(rng, vec![len], density.max(0.5), gen);
        let got = backend::expand(&to_tensor(&v, ma), dim, &OutputPattern::from_tensor(&to_tensor(&a, false)))
            .map_err(kerr)?;
        oracle::compare(&Dense::of(&got), &oracle::expand(&v, dim, &a), tol).map_err(|e| err("expand", e))?;
    }
    Ok(())
}

fn pat_tensor<T: Scalar>(pat: &Dense<T>) -> SparseTensor<T> {
    to_tensor(pat, false).to_sparse()
}

/// Within-subgraph message passing (dim 1, sum, input pattern) against the
/// triple loop on khop supports; also checks input pattern = full pattern
/// restricted to the support, on both representations.
pub fn subgraph_loop(graphs: &[Graph]) -> SuiteReport {
    let mut rep = SuiteReport::new("subgraph-triple-loop");
    for (gi, g) in graphs.iter().enumerate() {
        let hop = 1 + gi % 3;
        let h = Tensor::Sparse(khop_sampler(g, hop));
        let a = Tensor::Sparse(g.adjacency::<i64>());
        rep.cases += 1;
        let run = |h: &Tensor<i64>, a: &Tensor<i64>, pol| message_passing(h, a, OpDim(1), Aggregator::Sum, pol);
        let (Ok(inp), Ok(full), Ok(masked)) = (
            run(&h, &a, PatternPolicy::InputPattern),
            run(&h, &a, PatternPolicy::FullPattern),
            run(&Tensor::Masked(h.to_masked()), &Tensor::Masked(a.to_masked()), PatternPolicy::InputPattern),
        ) else {
            rep.fail(format!("graph {gi}: kernel error"));
            continue;
        };
        let want = oracle::triple_loop(&Dense::of(&h), g);
        if let Err(e) = oracle::compare(&Dense::of(&inp), &want, 0.0) {
            rep.fail(format!("graph {gi} (n={}, hop={hop}): {e}", g.num_nodes()));
        }
        if let Err(e) = oracle::compare(&Dense::of(&masked), &want, 0.0) {
            rep.fail(format!("graph {gi} dense route: {e}"));
        }
        let mut restricted = Dense::of(&inp);
        let fd = Dense::of(&full);
        for (p, c) in restricted.cells.iter_mut().enumerate() {
            if c.is_some() {
                *c = Some(fd.cells[p].unwrap_or(0));
            }
        }
        if let Err(e) = oracle::compare(&Dense::of(&inp), &restricted, 0.0) {
            rep.fail(format!("graph {gi}: input pattern differs from full pattern on support: {e}"));
        }
    }
    rep
}

/// khop sampler values against Floyd–Warshall distances.
pub fn spd(graphs: &[Graph], hops: &[usize]) -> SuiteReport {
    let mut rep = SuiteReport::new("bfs-spd");
    for (gi, g) in graphs.iter().enumerate() {
        let dist = oracle::all_pairs_spd(g);
        for &hop in hops {
            rep.cases += 1;
            let t = khop_sampler(g, hop);
            let n = g.num_nodes();
            let mut expected = 0;
            'outer: for (i, row) in dist.iter().enumerate() {
                for (j, d) in row.iter().enumerate() {
                    let want = d.filter(|&d| d <= hop).map(|d| d as i64);
                    expected += usize::from(want.is_some());
                    if t.get(&[i as i64, j as i64]).map(|v| v[0]) != want {
                        rep.fail(format!("graph {gi} (n={n}) hop {hop}: entry ({i},{j})"));
                        break 'outer;
                    }
                }
            }
            if t.nnz() != expected {
                rep.fail(format!("graph {gi} hop {hop}: {} entries, expected {expected}", t.nnz()));
            }
        }
    }
    rep
}

/// Sampler used for an architecture's tuple features.
pub fn arch_sampler(arch: Arch, hop: u32) -> Sampler {
    if arch.tuple_order() == 3 {
        Sampler::I2(1)
    } else {
        Sampler::KHop(hop)
    }
}

/// Small configuration used by the model suites.
pub fn suite_config(arch: Arch, rep: Representation, seed: u64) -> ModelConfig {
    let mut c = ModelConfig::new(arch);
    c.hidden = 8;
    c.num_layers = 2;
    c.seed = seed;
    c.representation = rep;
    c.cross_representation = rep != arch.native_representation();
    c
}

fn prep(graphs: &[&Graph], s: Sampler) -> Vec<PreprocessedGraph> {
    graphs.iter().map(|g| PreprocessedGraph::new((*g).clone(), s)).collect()
}

fn run(cfg: &ModelConfig, items: &[PreprocessedGraph]) -> hot_core::Result<Vec<f64>> {
    let batch = Batch::collate(items, cfg.representation)?;
    Model::for_batch(cfg.clone(), &batch)?.forward(&batch)
}

/// Batched forward equals per-graph forwards (per-graph normalization), on
/// the sparse route for every architecture and also the dense route for
/// the dense-native ones.
pub fn batching(graphs: &[Graph], archs: &[Arch], batches: usize, max_b: usize, seed: u64, tol: f64) -> SuiteReport {
    let mut rep = SuiteReport::new("batching-consistency");
    for &arch in archs {
        let mut sub = SuiteReport::new(arch.name());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reps = vec![Representation::Sparse];
        if arch.native_representation() == Representation::Dense {
            reps.push(Representation::Dense);
        }
        for bi in 0..batches {
            let size = rng.gen_range(1..=max_b);
            let members: Vec<&Graph> = (0..size).map(|_| graphs.choose(&mut rng).unwrap()).collect();
            let items = prep(&members, arch_sampler(arch, 2));
            for &r in &reps {
                let mut cfg = suite_config(arch, r, seed ^ bi as u64);
                cfg.norm = NormMode::PerGraph;
                sub.cases += 1;
                let batched = run(&cfg, &items);
                let singles: hot_core::Result<Vec<f64>> =
                    items.iter().map(|it| run(&cfg, std::slice::from_ref(it)).map(|p| p[0])).collect();
                match (batched, singles) {
                    (Ok(b), Ok(s)) => {
                        for (k, (x, y)) in b.iter().zip(&s).enumerate() {
                            sub.track(*x, *y);
                            if !close(*x, *y, tol) || !x.is_finite() {
                                sub.fail(format!("batch {bi} graph {k}: {x} vs {y}"));
                            }
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => sub.fail(format!("batch {bi}: {e}")),
                }
            }
        }
        rep.merge_from(sub);
    }
    rep
}

/// Predictions are invariant to node relabeling.
pub fn permutation(graphs: &[Graph], archs: &[Arch], pairs: usize, seed: u64, tol: f64) -> SuiteReport {
    let mut rep = SuiteReport::new("permutation-invariance");
    for &arch in archs {
        let mut sub = SuiteReport::new(arch.name());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = suite_config(arch, arch.native_representation(), seed);
        for pi in 0..pairs {
            let g = &graphs[pi % graphs.len()];
            let mut perm: Vec<usize> = (0..g.num_nodes()).collect();
            perm.shuffle(&mut rng);
            let moved = g.permute(&perm).expect("valid permutation");
            let s = arch_sampler(arch, 2);
            sub.cases += 1;
            match (run(&cfg, &prep(&[g], s)), run(&cfg, &prep(&[&moved], s))) {
                (Ok(a), Ok(b)) => {
                    sub.track(b[0], a[0]);
                    if (b[0] - a[0]).abs() > tol * a[0].abs() || !a[0].is_finite() {
                        sub.fail(format!("pair {pi} (n={}): {} vs {}", g.num_nodes(), a[0], b[0]));
                    }
                }
                (Err(e), _) | (_, Err(e)) => sub.fail(format!("pair {pi}: {e}")),
            }
        }
        rep.merge_from(sub);
    }
    rep
}

/// Sparse and dense routes agree: on full supports for the dense-native
/// architectures, on khop supports for the rest.
pub fn cross_representation(graphs: &[Graph], archs: &[Arch], seed: u64, tol: f64) -> SuiteReport {
    let mut rep = SuiteReport::new("cross-representation");
    for &arch in archs {
        let mut sub = SuiteReport::new(arch.name());
        for (gi, chunk) in graphs.chunks(4).enumerate() {
            let members: Vec<&Graph> = chunk.iter().collect();
            let s = if arch.native_representation() == Representation::Dense {
                let diameter_bound = chunk.iter().map(Graph::num_nodes).max().unwrap_or(1) as u32;
                Sampler::KHop(diameter_bound.max(1))
            } else {
                arch_sampler(arch, 2)
            };
            let items = prep(&members, s);
            let sp = run(&suite_config(arch, Representation::Sparse, seed), &items);
            let de = run(&suite_config(arch, Representation::Dense, seed), &items);
            sub.cases += 1;
            match (sp, de) {
                (Ok(a), Ok(b)) => {
                    for (x, y) in a.iter().zip(&b) {
                        sub.track(*x, *y);
                        if !close(*x, *y, tol) {
                            sub.fail(format!("chunk {gi}: sparse {x} vs dense {y}"));
                        }
                    }
                }
                (Err(e), _) | (_, Err(e)) => sub.fail(format!("chunk {gi}: {e}")),
            }
        }
        rep.merge_from(sub);
    }
    rep
}

/// Graph operators give the same result on both representations for random
/// features on khop supports.
pub fn dispatch_agreement(graphs: &[Graph], seed: u64, tol: f64) -> SuiteReport {
    let mut rep = SuiteReport::new("dispatch-agreement");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (gi, g) in graphs.iter().enumerate() {
        let support = khop_sampler(g, 1 + gi % 3);
        let values = (0..support.nnz() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = Tensor::Sparse(support.with_values(vec![3], values).expect("row width matches"));
        let a = Tensor::Sparse(g.adjacency::<f64>());
        let (hm, am) = (Tensor::Masked(h.to_masked()), Tensor::Masked(a.to_masked()));
        let mut check = |what: String, sp: hot_core::Result<Tensor<f64>>, de: hot_core::Result<Tensor<f64>>| {
            rep.cases += 1;
            let r = match (sp, de) {
                (Ok(x), Ok(y)) => oracle::compare(&Dense::of(&y), &Dense::of(&x), tol),
                (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
            };
            if let Err(e) = r {
                rep.fail(format!("graph {gi} {what}: {e}"));
            }
        };
        for dim in 0..2 {
            for agg in KERNEL_AGGREGATORS {
                let pol = PatternPolicy::InputPattern;
                check(
                    format!("message_passing dim {dim} {agg}"),
                    message_passing(&h, &a, OpDim(dim), agg, pol),
                    message_passing(&hm, &am, OpDim(dim), agg, pol),
                );
                check(format!("pooling dim {dim} {agg}"), pooling(&h, OpDim(dim), agg), pooling(&hm, OpDim(dim), agg));
            }
            let pooled = pooling(&h, OpDim(dim), Aggregator::Sum).expect("pooling a valid tensor");
            let pooled_m = Tensor::Masked(pooled.to_masked());
            check(
                format!("unpooling dim {dim}"),
                unpooling(&pooled, OpDim(dim), &h),
                unpooling(&pooled_m, OpDim(dim), &hm),
            );
        }
        check("diagonal".into(), diagonal(&h), diagonal(&hm));
    }
    rep
}

/// The operator compositions each architecture's layer must execute.
pub fn operator_table(arch: Arch) -> Vec<&'static str> {
    let mut v = match arch {
        Arch::Ngnn | Arch::Drfwl | Arch::Ppgn | Arch::Ngat => vec!["M1"],
        Arch::Gnnak => vec!["M1", "U0∘P0", "U1∘P1"],
        Arch::Dssgnn => vec!["M1", "U1∘M0∘P1"],
        Arch::Sun => vec!["M1", "U0∘D", "U1∘D", "U0∘P0", "U1∘P1", "U0∘M0∘P0"],
        Arch::I2gnn => vec!["M2"],
        Arch::Sswl => vec!["M1", "M0"],
    };
    v.sort_unstable();
    v
}

/// Instrumented forwards emit exactly each architecture's operator multiset.
pub fn trace(graphs: &[Graph], archs: &[Arch], seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("operator-trace");
    let members: Vec<&Graph> = graphs.iter().take(3).collect();
    for &arch in archs {
        rep.cases += 1;
        let cfg = suite_config(arch, arch.native_representation(), seed);
        let items = prep(&members, arch_sampler(arch, 2));
        let result = Batch::collate(&items, cfg.representation)
            .and_then(|b| Model::for_batch(cfg.clone(), &b)?.forward_traced(&b));
        match result {
            Ok((_, traces)) => {
                for (t, tr) in traces.iter().enumerate() {
                    let got = tr.compositions();
                    if got != operator_table(arch) {
                        rep.fail(format!("{arch} layer {t}: {got:?}"));
                    }
                }
            }
            Err(e) => rep.fail(format!("{arch}: {e}")),
        }
    }
    rep
}

/// Support preservation and finiteness of every layer output, plus
/// collate/slice recovery and worker-count independence of preprocessing.
pub fn invariants(graphs: &[Graph], archs: &[Arch], seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("pipeline-invariants");
    let members: Vec<&Graph> = graphs.iter().take(6).collect();
    for &arch in archs {
        rep.cases += 1;
        let cfg = suite_config(arch, Representation::Sparse, seed);
        let items = prep(&members, arch_sampler(arch, 2));
        let check = || -> hot_core::Result<Option<String>> {
            let batch = Batch::collate(&items, Representation::Sparse)?;
            let model = Model::for_batch(cfg.clone(), &batch)?;
            let h0 = model.init_embedding(&batch)?;
            let mut h = h0.clone();
            for t in 0..cfg.num_layers {
                h = model.layer_forward(t, &h, &batch, None)?;
                if !h.to_sparse().same_pattern(&h0.to_sparse()) {
                    return Ok(Some(format!("{arch}: layer {t} changed the support")));
                }
                let mut finite = true;
                h.for_each_existing(|_, r| finite &= r.iter().all(|v| v.is_finite()));
                if !finite {
                    return Ok(Some(format!("{arch}: layer {t} produced a non-finite value")));
                }
            }
            Ok(None)
        };
        match check() {
            Ok(None) => {}
            Ok(Some(msg)) => rep.fail(msg),
            Err(e) => rep.fail(format!("{arch}: {e}")),
        }
    }
    let items = prep(&members, Sampler::KHop(2));
    rep.cases += 1;
    match collate_sparse(&items) {
        Ok(b) => {
            for (k, it) in items.iter().enumerate() {
                if b.item(k).ok().as_ref() != Some(it) {
                    rep.fail(format!("collate/slice: graph {k} not recovered"));
                }
            }
        }
        Err(e) => rep.fail(format!("collate: {e}")),
    }
    rep.cases += 1;
    let owned: Vec<Graph> = graphs.to_vec();
    match (preprocess(&owned, Sampler::KHop(2), 1), preprocess(&owned, Sampler::KHop(2), 8)) {
        (Ok(a), Ok(b)) if a == b => {}
        _ => rep.fail("preprocessing depends on worker count".into()),
    }
    rep
}

/// Every suite over one graph pool, as run by `hot verify`.
pub fn verify_all(graphs: &[Graph], archs: &[Arch], seed: u64) -> Vec<SuiteReport> {
    let small: Vec<Graph> = graphs.iter().filter(|g| g.num_nodes() <= 12).cloned().collect();
    let mut dense_eq = kernels(seed, 60, 12, 1e-5);
    dense_eq.name = "dense-equivalence".into();
    dense_eq.merge_from(dispatch_agreement(&small, seed, 1e-4));
    dense_eq.merge_from(cross_representation(&small, archs, seed, 1e-4));
    vec![
        dense_eq,
        subgraph_loop(&small),
        spd(graphs, &[1, 2, 3]),
        batching(&small, archs, 10, 4, seed, 1e-5),
        permutation(&small, archs, 10, seed, 1e-5),
        trace(&small, archs, seed),
        invariants(&small, archs, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use hot_core::data::generate::path_graph;

    #[test]
    fn empty_report_does_not_pass() {
        assert!(!SuiteReport::new("x").passed());
    }

    #[test]
    fn failures_are_capped() {
        let mut r = SuiteReport::new("x");
        for k in 0..50 {
            r.fail(k.to_string());
        }
        assert_eq!(r.failures.len(), 21);
    }

    #[test]
    fn operator_table_sizes() {
        let sizes: Vec<usize> = Arch::ALL.iter().map(|&a| operator_table(a).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 1 + 3 + 2 + 6 + 1 + 1 + 2 + 1 + 1);
    }

    #[test]
    fn dense_round_trip_through_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = random_dense::<i64>(&mut rng, vec![3, 4], 0.5, &|r| r.gen_range(-3..=3));
        for masked in [false, true] {
            assert!(oracle::compare(&Dense::of(&to_tensor(&d, masked)), &d, 0.0).is_ok());
        }
    }

    #[test]
    fn small_runs_pass() {
        let graphs: Vec<Graph> = (2..7).map(path_graph).collect();
        assert!(kernels(1, 24, 6, 1e-5).passed());
        assert!(subgraph_loop(&graphs).passed());
        assert!(spd(&graphs, &[1, 2]).passed());
        assert!(trace(&graphs, &[Arch::Sun, Arch::I2gnn], 0).passed());
    }

    #[test]
    fn comparison_catches_a_wrong_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_dense::<i64>(&mut rng, vec![4, 4], 1.0, &|r| r.gen_range(1..=3));
        let mut want = oracle::matmul(&a, &a, Aggregator::Sum, None);
        let got =
            Dense::of(&backend::matmul(&to_tensor(&a, false), &to_tensor(&a, true), Aggregator::Sum, None).unwrap());
        assert!(oracle::compare(&got, &want, 0.0).is_ok());
        want.cells[5] = want.cells[5].map(|v| v + 1);
        assert!(oracle::compare(&got, &want, 0.0).is_err());
    }
}
