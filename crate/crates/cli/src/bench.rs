//! Timing and peak-memory comparison of the two representations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use hot_core::data::{Batch, PreprocessedGraph};
use hot_core::model::{representation_name, Arch, Model, ModelConfig};
use hot_core::{HotError, Representation, Result};

use crate::alloc;
use crate::format::fmt_g;

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub warmups: usize,
    pub runs: usize,
    /// Template for every run; `arch` and `representation` are overwritten.
    pub template: ModelConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        let mut template = ModelConfig::new(Arch::Ngnn);
        template.hidden = 8;
        template.num_layers = 1;
        Self { warmups: 2, runs: 5, template }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub arch: Arch,
    pub representation: Representation,
    pub n: usize,
    pub density: f64,
    pub graphs: usize,
    pub median_ms: f64,
    pub peak_bytes: usize,
    pub checksum: f64,
}

pub const CSV_HEADER: &str = "arch,representation,n,density,graphs,median_ms,peak_bytes,checksum";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3},{},{:.4}",
            self.arch,
            representation_name(self.representation),
            self.n,
            fmt_g(self.density),
            self.graphs,
            self.median_ms,
            self.peak_bytes,
            self.checksum
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{}", r.csv()).unwrap();
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        (xs[m - 1] + xs[m]) / 2.0
    } else {
        xs[m]
    }
}

fn density(items: &[&PreprocessedGraph]) -> f64 {
    let total: f64 = items
        .iter()
        .map(|it| {
            let n = it.graph.num_nodes() as f64;
            if n < 2.0 {
                0.0
            } else {
                2.0 * it.graph.num_undirected_edges() as f64 / (n * (n - 1.0))
            }
        })
        .sum();
    total / items.len() as f64
}

/// One measurement: peak heap over collate plus forward (when the tracking
/// allocator is installed) and the median forward time.
pub fn measure(items: &[PreprocessedGraph], cfg: &ModelConfig, opts: &BenchOptions) -> Result<(f64, usize, f64)> {
    let (preds, peak) = alloc::measure_peak(|| -> Result<Vec<f64>> {
        let batch = Batch::collate(items, cfg.representation)?;
        Model::for_batch(cfg.clone(), &batch)?.forward(&batch)
    });
    let checksum = preds?.iter().sum();
    let batch = Batch::collate(items, cfg.representation)?;
    let model = Model::for_batch(cfg.clone(), &batch)?;
    for _ in 0..opts.warmups {
        model.forward(&batch)?;
    }
    let mut times = Vec::with_capacity(opts.runs);
    for _ in 0..opts.runs.max(1) {
        let t0 = Instant::now();
        std::hint::black_box(model.forward(&batch)?);
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok((median(times), peak, checksum))
}

/// Benchmarks every (arch, representation, n) group; rows come back sorted
/// by arch name, representation name and n.
pub fn run(
    items: &[PreprocessedGraph],
    archs: &[Arch],
    reps: &[Representation],
    opts: &BenchOptions,
) -> Result<Vec<BenchRow>> {
    if items.is_empty() {
        return Err(HotError::Config("bench: the cache holds no graphs".into()));
    }
    let mut groups: BTreeMap<usize, Vec<&PreprocessedGraph>> = BTreeMap::new();
    for it in items {
        groups.entry(it.graph.num_nodes()).or_default().push(it);
    }
    let order = items[0].tuple_feature.sparse_dim();
    let mut rows = Vec::new();
    for &arch in archs {
        if arch.tuple_order() != order {
            log::warn!("skipping {arch}: needs order-{} tuples, cache has order {order}", arch.tuple_order());
            continue;
        }
        for &rep in reps {
            let mut cfg = opts.template.clone();
            cfg.arch = arch;
            cfg.representation = rep;
            cfg.cross_representation = rep != arch.native_representation();
            for (&n, group) in &groups {
                let owned: Vec<PreprocessedGraph> = group.iter().map(|g| (*g).clone()).collect();
                let (median_ms, peak_bytes, checksum) = measure(&owned, &cfg, opts)?;
                rows.push(BenchRow {
                    arch,
                    representation: rep,
                    n,
                    density: density(group),
                    graphs: group.len(),
                    median_ms,
                    peak_bytes,
                    checksum,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.arch.name(), representation_name(a.representation), a.n).cmp(&(
            b.arch.name(),
            representation_name(b.representation),
            b.n,
        ))
    });
    Ok(rows)
}
