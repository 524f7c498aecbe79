//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p hot-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hot_cli::alloc::{self, TrackingAlloc};
use hot_cli::bench::{self, BenchOptions};
use hot_cli::suites::{self, SuiteReport};
use hot_core::data::generate::{erdos_renyi, path_graph, random_regular, zinc_like_sized};
use hot_core::data::{Graph, PreprocessedGraph, Sampler};
use hot_core::model::Arch;
use hot_core::Representation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[global_allocator]
static GLOBAL: TrackingAlloc = TrackingAlloc;

const SEED: u64 = 20_240_601;

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn from_report(name: &'static str, r: SuiteReport, extra: &str) -> Outcome {
    let mut detail = format!("{} cases", r.cases);
    if let Some(e) = r.max_rel_err {
        detail.push_str(&format!(", max rel err {e:.2e}"));
    }
    detail.push_str(extra);
    for f in r.failures.iter().take(5) {
        detail.push_str(&format!("\n      {f}"));
    }
    Outcome { name, passed: r.passed(), detail }
}

/// Mixed small graphs: paths, cycles, trees with rings, random graphs.
fn small_graphs(count: usize, max_n: usize, rng: &mut ChaCha8Rng) -> Vec<Graph> {
    (0..count)
        .map(|i| {
            let n = rng.gen_range(2..=max_n);
            match i % 5 {
                0 => path_graph(n),
                1 if n >= 3 => random_regular(n, 2, rng),
                2 => zinc_like_sized(n, rng),
                _ => erdos_renyi(n, rng.gen_range(0.05..0.7), rng),
            }
        })
        .collect()
}

fn kernels() -> Outcome {
    let t0 = Instant::now();
    let r = suites::kernels(SEED, 240, 20, 1e-5);
    let secs = t0.elapsed().as_secs_f64();
    let mut o = from_report("oracle-equivalence-kernels", r, &format!(", {secs:.2}s"));
    if secs >= 60.0 {
        o.passed = false;
        o.detail.push_str(" (over the 1 min budget)");
    }
    o
}

fn subgraph_loop() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    from_report("subgraph-loop-conformance", suites::subgraph_loop(&small_graphs(120, 12, &mut rng)), "")
}

fn sampler() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    from_report("sampler-correctness", suites::spd(&small_graphs(120, 30, &mut rng), &[1, 2, 3]), "")
}

fn batching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let pool = small_graphs(60, 14, &mut rng);
    from_report("batching-consistency", suites::batching(&pool, &Arch::ALL, 50, 8, SEED, 1e-5), "")
}

fn cross_representation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let connected: Vec<Graph> = (0..40).map(|_| zinc_like_sized(rng.gen_range(4..=14), &mut rng)).collect();
    let mut r = suites::cross_representation(&connected, &Arch::ALL, SEED, 1e-4);
    r.merge_from(suites::dispatch_agreement(&small_graphs(40, 12, &mut rng), SEED, 1e-4));
    from_report("cross-representation", r, "")
}

fn permutation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let pool = small_graphs(50, 16, &mut rng);
    from_report("permutation-invariance", suites::permutation(&pool, &Arch::ALL, 50, SEED, 1e-5), "")
}

fn run_hot(args: &[&str], dir: &Path) -> Result<(), String> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_hot")).args(args).current_dir(dir).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("hot {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn determinism() -> Outcome {
    let check = || -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        run_hot(&["gen", "--kind", "er", "--num", "100", "--nodes", "8..40", "--seed", "11", "--out", "g.jsonl"], d)?;
        for (w, name) in [("1", "w1.hot"), ("8", "w8.hot")] {
            run_hot(&["preprocess", "--in", "g.jsonl", "--sampler", "khop:2", "--workers", w, "--cache", name], d)?;
        }
        let read = |p: &str| std::fs::read(d.join(p)).map_err(|e| e.to_string());
        if read("w1.hot")? != read("w8.hot")? {
            return Err("caches from 1 and 8 workers differ".into());
        }
        let cfg = "arch = NGNN\nlayers = 2\nhidden = 16\naggregator = sum\nrepresentation = sparse\nseed = 5\n";
        std::fs::write(d.join("m.cfg"), cfg).map_err(|e| e.to_string())?;
        for out in ["a.csv", "b.csv"] {
            run_hot(&["forward", "--cache", "w8.hot", "--config", "m.cfg", "--batch-size", "16", "--out", out], d)?;
        }
        if read("a.csv")? != read("b.csv")? {
            return Err("repeated forwards wrote different CSVs".into());
        }
        Ok(format!("cache {} bytes, csv {} bytes, both identical", read("w1.hot")?.len(), read("a.csv")?.len()))
    };
    match check() {
        Ok(detail) => Outcome { name: "determinism", passed: true, detail },
        Err(detail) => Outcome { name: "determinism", passed: false, detail },
    }
}

fn performance() -> Outcome {
    let name = "performance-signal";
    if !alloc::is_active() {
        return Outcome { name, passed: false, detail: "tracking allocator not installed".into() };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let items = vec![PreprocessedGraph::new(erdos_renyi(1000, 0.005, &mut rng), Sampler::KHop(1))];
    let opts = BenchOptions { warmups: 1, runs: 3, ..Default::default() };
    let t0 = Instant::now();
    let rows = match bench::run(&items, &[Arch::Ngnn], &[Representation::Sparse, Representation::Dense], &opts) {
        Ok(r) => r,
        Err(e) => return Outcome { name, passed: false, detail: e.to_string() },
    };
    let (dense, sparse) = (&rows[0], &rows[1]);
    let speedup = dense.median_ms / sparse.median_ms;
    let mem = dense.peak_bytes as f64 / sparse.peak_bytes.max(1) as f64;
    let agree = (dense.checksum - sparse.checksum).abs() <= 1e-4 * sparse.checksum.abs();
    Outcome {
        name,
        passed: speedup >= 2.0 && sparse.peak_bytes < dense.peak_bytes && agree,
        detail: format!(
            "n=1000, density {:.4}: sparse {:.2} ms / {} B, dense {:.1} ms / {} B, \
             speedup {speedup:.0}x, memory ratio {mem:.0}x, checksums {} ({:.1}s)",
            sparse.density,
            sparse.median_ms,
            sparse.peak_bytes,
            dense.median_ms,
            dense.peak_bytes,
            if agree { "agree" } else { "DIFFER" },
            t0.elapsed().as_secs_f64()
        ),
    }
}

fn coverage_trace() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let pool: Vec<Graph> = (0..3).map(|_| zinc_like_sized(10, &mut rng)).collect();
    from_report("coverage-trace", suites::trace(&pool, &Arch::ALL, SEED), "")
}

fn main() {
    let criteria: [fn() -> Outcome; 9] = [
        kernels,
        subgraph_loop,
        sampler,
        batching,
        cross_representation,
        permutation,
        determinism,
        performance,
        coverage_trace,
    ];
    let mut failed = 0;
    for c in criteria {
        let o = c();
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
