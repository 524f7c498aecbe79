//! Subcommand bodies, kept free of argument parsing so they can be tested.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hot_core::data::{
    generate::{generate, GenParams, GraphKind},
    load_graphs, preprocess_parallel, read_cache, write_graphs, Batch, CacheContents, CacheStatus, Graph, Sampler,
};
use hot_core::model::{Arch, Model, ModelConfig};
use hot_core::{HotError, Representation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{self, BenchOptions};
use crate::format::fmt_g;
use crate::suites::{self, SuiteReport};
use crate::{CliError, CliResult};

/// Environment variable naming the directory for default cache files.
pub const CACHE_DIR_ENV: &str = "HOT_CACHE_DIR";

/// Parses `A..B`, `A-B`, `A:B` (inclusive) or a single size.
pub fn parse_range(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("invalid node range `{s}`; expected MIN..MAX"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = match s.split_once("..").or_else(|| s.split_once('-')).or_else(|| s.split_once(':')) {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub struct GenArgs {
    pub kind: GraphKind,
    pub num: usize,
    pub nodes: (usize, usize),
    pub seed: u64,
    pub density: Option<f64>,
    pub degree: usize,
}

pub fn gen_graphs(args: &GenArgs) -> CliResult<Vec<Graph>> {
    if let Some(p) = args.density {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Usage(format!("density {p} is not a probability")));
        }
    }
    let params = GenParams {
        kind: args.kind,
        min_nodes: args.nodes.0,
        max_nodes: args.nodes.1,
        density: args.density,
        degree: args.degree,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    Ok(generate(&params, args.num, &mut rng))
}

pub fn gen(args: &GenArgs, out: &Path) -> CliResult<usize> {
    let graphs = gen_graphs(args)?;
    write_graphs(out, &graphs)?;
    Ok(graphs.len())
}

/// `$HOT_CACHE_DIR/<stem>-<sampler>.hot`, or under `.hot-cache` when unset.
pub fn default_cache_path(input: &Path, sampler: Sampler) -> PathBuf {
    let dir = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".hot-cache"));
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "graphs".into());
    let tag = sampler.to_string().replace(':', "");
    dir.join(format!("{stem}-{tag}.hot"))
}

pub fn preprocess(input: &Path, sampler: Sampler, workers: usize, cache: &Path) -> CliResult<(usize, CacheStatus)> {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let graphs = load_graphs(input)?;
    if let Some(dir) = cache.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    }
    let (items, status) = preprocess_parallel(&graphs, sampler, workers, cache)?;
    Ok((items.len(), status))
}

pub fn load_cache(path: &Path) -> CliResult<CacheContents> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "cache file {} does not exist; run `hot preprocess` first",
            path.display()
        )));
    }
    Ok(read_cache(path)?)
}

pub fn verify(cache: &CacheContents, arch: Option<Arch>, max_n: usize, seed: u64) -> Vec<SuiteReport> {
    let graphs: Vec<Graph> =
        cache.items.iter().filter(|it| it.graph.num_nodes() <= max_n).map(|it| it.graph.clone()).collect();
    let archs: Vec<Arch> = arch.map_or_else(|| Arch::ALL.to_vec(), |a| vec![a]);
    if graphs.is_empty() {
        let mut r = SuiteReport { name: "graph-pool".into(), cases: 0, failures: Vec::new(), max_rel_err: None };
        r.failures.push(format!("no cached graph has at most {max_n} nodes"));
        return vec![r];
    }
    suites::verify_all(&graphs, &archs, seed)
}

/// Predictions as CSV (`graph,prediction,target`), in cache order.
pub fn forward(cache: &CacheContents, cfg: &ModelConfig, batch_size: usize) -> CliResult<String> {
    if batch_size == 0 {
        return Err(CliError::Usage("--batch-size must be at least 1".into()));
    }
    if cache.sampler.order() != cfg.arch.tuple_order() {
        return Err(HotError::Config(format!(
            "{} needs order-{} tuples but the cache was built with {}",
            cfg.arch,
            cfg.arch.tuple_order(),
            cache.sampler
        ))
        .into());
    }
    let mut out = String::from("graph,prediction,target\n");
    let mut model: Option<Model> = None;
    let mut g = 0;
    for chunk in cache.items.chunks(batch_size) {
        let batch = Batch::collate(chunk, cfg.representation)?;
        if model.is_none() {
            model = Some(Model::for_batch(cfg.clone(), &batch)?);
        }
        let preds = model.as_ref().unwrap().forward(&batch)?;
        for (it, p) in chunk.iter().zip(preds) {
            let target = it.graph.target().map(fmt_g).unwrap_or_default();
            writeln!(out, "{g},{},{target}", fmt_g(p)).unwrap();
            g += 1;
        }
    }
    Ok(out)
}

pub fn parse_archs(s: &str) -> CliResult<Vec<Arch>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Arch::ALL.to_vec());
    }
    s.split(',').map(|a| a.parse::<Arch>().map_err(|e| CliError::Usage(e.to_string()))).collect()
}

pub fn parse_reps(s: &str) -> CliResult<Vec<Representation>> {
    match s {
        "sparse" => Ok(vec![Representation::Sparse]),
        "dense" => Ok(vec![Representation::Dense]),
        "both" => Ok(vec![Representation::Sparse, Representation::Dense]),
        other => Err(CliError::Usage(format!("unknown representation set `{other}`; use sparse, dense or both"))),
    }
}

pub fn bench(
    cache: &CacheContents,
    archs: &[Arch],
    reps: &[Representation],
    template: Option<ModelConfig>,
) -> CliResult<String> {
    let mut opts = BenchOptions::default();
    if let Some(t) = template {
        opts.template = t;
    }
    let rows = bench::run(&cache.items, archs, reps, &opts)?;
    Ok(bench::to_csv(&rows))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("10..20").unwrap(), (10, 20));
        assert_eq!(parse_range("10..=20").unwrap(), (10, 20));
        assert_eq!(parse_range("5-8").unwrap(), (5, 8));
        assert_eq!(parse_range("7").unwrap(), (7, 7));
        assert!(parse_range("9..3").is_err());
        assert!(parse_range("0..3").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn archs_and_reps() {
        assert_eq!(parse_archs("all").unwrap().len(), 9);
        assert_eq!(parse_archs("NGNN,ppgn").unwrap(), vec![Arch::Ngnn, Arch::Ppgn]);
        assert!(parse_archs("GCN").is_err());
        assert_eq!(parse_reps("both").unwrap().len(), 2);
        assert!(parse_reps("csr").is_err());
    }

    #[test]
    fn cache_path_uses_stem_and_sampler() {
        let p = default_cache_path(Path::new("data/zinc.jsonl"), Sampler::KHop(2));
        assert_eq!(p.file_name().unwrap(), "zinc-khop2.hot");
    }

    #[test]
    fn gen_is_seeded() {
        let args = GenArgs { kind: GraphKind::Er, num: 5, nodes: (4, 9), seed: 3, density: None, degree: 3 };
        assert_eq!(gen_graphs(&args).unwrap(), gen_graphs(&args).unwrap());
        let bad = GenArgs { density: Some(1.5), ..args };
        assert!(matches!(gen_graphs(&bad), Err(CliError::Usage(_))));
    }

    #[test]
    fn forward_rejects_order_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("g.jsonl");
        let args = GenArgs { kind: GraphKind::Path, num: 3, nodes: (3, 5), seed: 0, density: None, degree: 2 };
        gen(&args, &input).unwrap();
        let cache = dir.path().join("c.hot");
        preprocess(&input, Sampler::KHop(1), 2, &cache).unwrap();
        let contents = load_cache(&cache).unwrap();
        let csv = forward(&contents, &ModelConfig::new(Arch::Ngnn), 2).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(forward(&contents, &ModelConfig::new(Arch::I2gnn), 2).is_err());
    }
}
