//! Command line front end: synthetic instance generation, solving,
//! benchmarking, and export.

mod bench;
mod export;
mod generate;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "territory",
    about = "Territory design: balanced, contiguous territories with small pairwise travel times",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Kated,
    Kalocalloc,
    Bkns,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Kated => "kated",
            Algo::Kalocalloc => "kalocalloc",
            Algo::Bkns => "bkns",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Geojson,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance: clustered points in a square with
    /// log-uniform activities and Euclidean travel times.
    Generate {
        /// Number of basic areas.
        #[arg(long)]
        n: usize,
        /// Number of territories.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of point clusters; defaults to k.
        #[arg(long)]
        clusters: Option<usize>,
        /// Gaussian spread of points around their cluster anchor.
        #[arg(long, default_value_t = 150.0)]
        spread: f64,
        /// Imbalance tolerance written into the instance.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve an instance and write a solution file.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum)]
        algo: Algo,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        /// Overrides the instance's imbalance tolerance.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Contiguity penalty factor in the evolutionary objective.
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Edge length factor of the proximity model.
        #[arg(long, default_value_t = 5.0)]
        beta: f64,
        /// Node degree bound of the proximity model.
        #[arg(long, default_value_t = 20)]
        gamma: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Deterministic generation budget for kated (bounds the run
        /// together with the time limit).
        #[arg(long)]
        generations: Option<u64>,
        /// Deterministic start budget for kalocalloc.
        #[arg(long)]
        starts: Option<u64>,
        /// Relative optimality gap for the allocation step.
        #[arg(long, default_value_t = 0.001)]
        gap: f64,
        /// Wall-clock cap per allocation solve, seconds.
        #[arg(long, default_value_t = 15.0)]
        alloc_time_limit: f64,
        /// Population size per worker for kated.
        #[arg(long)]
        population: Option<usize>,
        #[arg(long, short, default_value = "solution.json")]
        out: PathBuf,
        /// Write a JSON-lines run log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the proximity model as an edge list here.
        #[arg(long)]
        dump_model: Option<PathBuf>,
    },
    /// Run solvers repeatedly over instances and tabulate the results.
    Bench {
        /// Instance files.
        #[arg(long, required = true, num_args = 1..)]
        instances: Vec<PathBuf>,
        /// Solvers to run.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t =
            vec![Algo::Kated, Algo::Kalocalloc, Algo::Bkns])]
        algos: Vec<Algo>,
        /// Repetitions per stochastic solver (bkns runs once).
        #[arg(long, default_value_t = 40)]
        reps: u64,
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 5.0)]
        beta: f64,
        #[arg(long, default_value_t = 20)]
        gamma: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Concurrent benchmark cells (each run stays single-worker).
        #[arg(long, default_value_t = 2)]
        workers: usize,
        /// Deterministic generation budget for kated runs.
        #[arg(long)]
        generations: Option<u64>,
        /// Deterministic start budget for kalocalloc runs.
        #[arg(long)]
        starts: Option<u64>,
        #[arg(long, default_value_t = 0.001)]
        gap: f64,
        #[arg(long, default_value_t = 15.0)]
        alloc_time_limit: f64,
        /// Write the report as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Export a solution as GeoJSON points or CSV.
    Export {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { n, k, seed, clusters, spread, epsilon, out } => {
            generate::run(n, k, seed, clusters, spread, epsilon, &out).map(|_| ExitCode::SUCCESS)
        }
        Command::Solve {
            instance,
            algo,
            time_limit,
            epsilon,
            alpha,
            beta,
            gamma,
            seed,
            workers,
            generations,
            starts,
            gap,
            alloc_time_limit,
            population,
            out,
            log,
            dump_model,
        } => solve::run(solve::Args {
            instance,
            algo,
            time_limit,
            epsilon,
            alpha,
            beta,
            gamma,
            seed,
            workers,
            generations,
            starts,
            gap,
            alloc_time_limit,
            population,
            out,
            log,
            dump_model,
        }),
        Command::Bench {
            instances,
            algos,
            reps,
            time_limit,
            epsilon,
            alpha,
            beta,
            gamma,
            seed,
            workers,
            generations,
            starts,
            gap,
            alloc_time_limit,
            csv,
        } => bench::run(bench::Args {
            instances,
            algos,
            reps,
            time_limit,
            epsilon,
            alpha,
            beta,
            gamma,
            seed,
            workers,
            generations,
            starts,
            gap,
            alloc_time_limit,
            csv,
        })
        .map(|_| ExitCode::SUCCESS),
        Command::Export { solution, instance, format, out } => {
            export::run(&solution, &instance, format, &out).map(|_| ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
