use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hot_cli::alloc::TrackingAlloc;
use hot_cli::commands::{self, GenArgs};
use hot_cli::{CliError, CliResult};
use hot_core::data::generate::GraphKind;
use hot_core::data::{CacheStatus, Sampler};
use hot_core::model::{Arch, ModelConfig};

#[global_allocator]
static GLOBAL: TrackingAlloc = TrackingAlloc;

/// Higher-order graph networks on sparse and dense tuple tensors.
#[derive(Parser)]
#[command(name = "hot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic JSONL graph dataset.
    Gen {
        /// er, regular, path or zinc-like.
        #[arg(long)]
        kind: GraphKind,
        #[arg(long)]
        num: usize,
        /// Node count range, e.g. 10..30.
        #[arg(long, default_value = "10..30")]
        nodes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge probability for `er` (default: expected degree 3).
        #[arg(long)]
        density: Option<f64>,
        /// Degree for `regular`.
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample tuple features for every graph and write the cache.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        /// khop:H or i2:H.
        #[arg(long)]
        sampler: Sampler,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Defaults to $HOT_CACHE_DIR/<stem>-<sampler>.hot.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run the oracle suites on cached graphs.
    Verify {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        arch: Option<Arch>,
        #[arg(long, default_value_t = 20)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write per-graph predictions as CSV.
    Forward {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time sparse and dense forwards grouped by graph size.
    Bench {
        #[arg(long)]
        cache: PathBuf,
        /// Comma-separated architectures or `all`.
        #[arg(long, default_value = "NGNN")]
        archs: String,
        /// sparse, dense or both.
        #[arg(long, default_value = "both")]
        reps: String,
        /// Model template; arch and representation are overridden per row.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { kind, num, nodes, seed, density, degree, out } => {
            let args = GenArgs { kind, num, nodes: commands::parse_range(&nodes)?, seed, density, degree };
            let n = commands::gen(&args, &out)?;
            println!("wrote {n} graphs to {}", out.display());
        }
        Command::Preprocess { input, sampler, workers, cache } => {
            let cache = cache.unwrap_or_else(|| commands::default_cache_path(&input, sampler));
            let (n, status) = commands::preprocess(&input, sampler, workers, &cache)?;
            let how = match status {
                CacheStatus::Loaded => "loaded",
                CacheStatus::Computed => "computed",
            };
            println!("{how} {n} graphs ({sampler}) in {}", cache.display());
        }
        Command::Verify { cache, arch, max_n, seed } => {
            let contents = commands::load_cache(&cache)?;
            let reports = commands::verify(&contents, arch, max_n, seed);
            for r in &reports {
                println!("{r}");
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            if failed > 0 {
                return Err(CliError::Verification { failed, total: reports.len() });
            }
        }
        Command::Forward { cache, config, batch_size, out } => {
            let contents = commands::load_cache(&cache)?;
            let cfg = ModelConfig::load(&config)?;
            commands::write_text(&out, &commands::forward(&contents, &cfg, batch_size)?)?;
        }
        Command::Bench { cache, archs, reps, config, out } => {
            let contents = commands::load_cache(&cache)?;
            let template = config.map(ModelConfig::load).transpose()?;
            let csv =
                commands::bench(&contents, &commands::parse_archs(&archs)?, &commands::parse_reps(&reps)?, template)?;
            commands::write_text(&out, &csv)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
