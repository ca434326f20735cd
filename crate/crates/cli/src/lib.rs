//! Command-line front end: dataset generation, solving, grid search,
//! ablation, rank statistics and scatter plots.

use std::path::PathBuf;
use std::ffi::OsString;

use clap::{Args, Parser, Subcommand};
use dscofs::synth::SyntheticKind;
use dscofs::DscofsError;

pub mod commands;
pub mod config;
pub mod grid;
pub mod plot;

#[derive(Parser, Debug)]
#[command(name = "dscofs", version, about = "Doubly sparse PCA feature selection")]
pub struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a planted synthetic dataset.
    Synth {
        #[arg(value_parser = parse_kind)]
        name: SyntheticKind,
        #[arg(long, default_value_t = dscofs::synth::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = dscofs::synth::DEFAULT_JITTER)]
        jitter: f64,
    },
    /// Solve once and rank features.
    Select(SolveArgs),
    /// Grid search over μ, α and feature counts.
    Grid {
        #[command(flatten)]
        solve: SolveArgs,
        /// Ignore existing cell checkpoints.
        #[arg(long)]
        fresh: bool,
    },
    /// Compare the row-only and doubly sparse variants from one start.
    Ablate {
        #[command(flatten)]
        solve: SolveArgs,
        /// Size of the compared top rankings.
        #[arg(long, default_value_t = 100)]
        top: usize,
        /// Disable the element budget in both runs.
        #[arg(long)]
        identical: bool,
    },
    /// Friedman test and Nemenyi post-hoc on a score table.
    Stats {
        scores: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Scatter plot of two features as SVG.
    Plot {
        data: PathBuf,
        /// Two 1-based feature indices, e.g. `4,5`.
        #[arg(long, value_delimiter = ',')]
        features: Vec<usize>,
        #[arg(long, default_value = "plot.svg")]
        file: String,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    /// Samples-as-rows CSV.
    pub data: PathBuf,
    /// JSON file with solver and grid fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub s: Option<usize>,
    /// Sets μ1 = μ2.
    #[arg(long)]
    pub mu: Option<f64>,
    /// K-means repetitions per evaluation.
    #[arg(long, default_value_t = dscofs::cluster::DEFAULT_RUNS)]
    pub runs: usize,
}

fn parse_kind(s: &str) -> Result<SyntheticKind, String> {
    s.parse().map_err(|e: DscofsError| e.to_string())
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    }
    let result = match &cli.command {
        Command::Synth { name, samples, jitter } => {
            commands::synth(*name, *samples, *jitter, cli.seed, &cli.out)
        }
        Command::Select(args) => commands::select(args, cli.seed, &cli.out),
        Command::Grid { solve, fresh } => grid::grid(solve, *fresh, cli.seed, &cli.out),
        Command::Ablate { solve, top, identical } => {
            commands::ablate(solve, *top, *identical, cli.seed, &cli.out)
        }
        Command::Stats { scores, alpha } => commands::stats(scores, *alpha, cli.seed, &cli.out),
        Command::Plot { data, features, file } => plot::plot(data, features, &cli.out.join(file)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}
