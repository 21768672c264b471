mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crerank::Error;

#[derive(Parser)]
#[command(name = "crerank", version, about = "Two-stage session recommender: candidate generation and re-ranking")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set reranker.k=50`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (`data.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Raw dataset file (`data.raw`).
    #[arg(long, global = true)]
    raw: Option<PathBuf>,

    /// Processed corpus (`data.corpus`).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Generator checkpoint (`data.generator`).
    #[arg(long, global = true)]
    generator: Option<PathBuf>,

    /// Re-ranker checkpoint (`data.reranker`).
    #[arg(long, global = true)]
    reranker: Option<PathBuf>,

    /// Candidate cache (`data.cache`).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    /// Worker threads; defaults to one per core.
    #[arg(long, env = "CRERANK_THREADS", global = true)]
    threads: Option<usize>,

    /// Load checkpoints whose configuration differs from the run's.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and preprocess a raw dataset into a corpus file.
    Ingest,
    /// Fit the first-stage generator (`generator.kind`: cf, stamp or stmo).
    TrainGenerator,
    /// Pre-compute the generator's candidate lists for the training split.
    CacheCandidates,
    /// Train the re-ranker on top of a frozen generator.
    TrainReranker,
    /// Recall@N and MRR@N on the test split.
    Evaluate {
        /// Evaluate the generator alone.
        #[arg(long)]
        baseline: bool,
        /// Cut-off (`eval.n`).
        #[arg(short, long)]
        n: Option<usize>,
    },
    /// Train and evaluate one re-ranker per k in `eval.sweep_ks`.
    SweepK,
    /// Train with and without rank embeddings and compare.
    AblateCre,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        "config" => 2,
        "io" => 3,
        "format" => 4,
        "training" => 5,
        _ => 70,
    }
}
