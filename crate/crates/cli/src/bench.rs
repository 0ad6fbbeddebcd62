//! Benchmark harness: (instance, solver, seed) cells run concurrently,
//! aggregated into a CSV report and an aligned text table.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};

use territory_core::baseline::solve_bkns;
use territory_core::evo::{solve_kated, EvoConfig};
use territory_core::eval::{check_feasibility, pairwise_cost};
use territory_core::graph::build_model;
use territory_core::instance::Instance;
use territory_core::localloc::{solve_kalocalloc, LocAllocConfig};
use territory_core::runlog::RunLogger;
use territory_core::{derive_seed, ModelGraph};

use crate::Algo;

pub struct Args {
    pub instances: Vec<PathBuf>,
    pub algos: Vec<Algo>,
    pub reps: u64,
    pub time_limit: f64,
    pub epsilon: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: usize,
    pub seed: u64,
    pub workers: usize,
    pub generations: Option<u64>,
    pub starts: Option<u64>,
    pub gap: f64,
    pub alloc_time_limit: f64,
    pub csv: Option<PathBuf>,
}

/// One aggregated (instance, solver) row.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub instance: String,
    pub solver: String,
    pub reps: u64,
    pub avg: f64,
    pub min: f64,
    pub max: f64,
    pub feasible_rate: f64,
    pub seconds: f64,
    pub errors: u64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,solver,reps,avg,min,max,feasible_rate,seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.instance, r.solver, r.reps, r.avg, r.min, r.max, r.feasible_rate, r.seconds
            ));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = [
            "instance", "solver", "reps", "avg", "min", "max", "feasible", "seconds",
        ];
        let mut cells: Vec<[String; 8]> = vec![header.map(String::from)];
        for r in &self.rows {
            cells.push([
                r.instance.clone(),
                r.solver.clone(),
                r.reps.to_string(),
                format!("{:.3}", r.avg),
                format!("{:.3}", r.min),
                format!("{:.3}", r.max),
                format!("{:.2}", r.feasible_rate),
                format!("{:.2}", r.seconds),
            ]);
        }
        let mut widths = [0usize; 8];
        for row in &cells {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(widths)
                .map(|(cell, w)| format!("{cell:>w$}"))
                .collect();
            out.push_str(&line.join("  "));
            out.push('\n');
        }
        out
    }
}

struct RunResult {
    cell: usize,
    cost: f64,
    feasible: bool,
    seconds: f64,
    error: Option<String>,
}

struct RunSpec {
    cell: usize,
    instance_idx: usize,
    algo: Algo,
    seed: u64,
}

pub fn run(args: Args) -> Result<BenchmarkReport> {
    let mut loaded: Vec<(String, Instance, ModelGraph)> = Vec::new();
    for path in &args.instances {
        let mut inst =
            Instance::load(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(eps) = args.epsilon {
            inst = inst.with_epsilon(eps)?;
        }
        let graph = build_model(&inst, args.beta, args.gamma)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        loaded.push((name, inst, graph));
    }

    // Cells in (instance, solver) order; one run per seed, bkns once.
    let mut specs: Vec<RunSpec> = Vec::new();
    let mut cells: Vec<(usize, Algo)> = Vec::new();
    for (i, _) in loaded.iter().enumerate() {
        for &algo in &args.algos {
            let cell = cells.len();
            cells.push((i, algo));
            let reps = if algo == Algo::Bkns { 1 } else { args.reps };
            for rep in 0..reps {
                specs.push(RunSpec {
                    cell,
                    instance_idx: i,
                    algo,
                    seed: derive_seed(args.seed, (cell as u64) << 32 | rep),
                });
            }
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<RunResult>> = Mutex::new(Vec::new());
    let workers = args.workers.max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= specs.len() {
                    return;
                }
                let spec = &specs[idx];
                let (_, instance, graph) = &loaded[spec.instance_idx];
                let outcome = run_one(&args, spec, instance, graph);
                results.lock().expect("results lock").push(outcome);
            });
        }
    });

    let results = results.into_inner().expect("no poisoned lock");
    let mut report = BenchmarkReport::default();
    for (cell, &(instance_idx, algo)) in cells.iter().enumerate() {
        let runs: Vec<&RunResult> = results.iter().filter(|r| r.cell == cell).collect();
        let ok: Vec<&&RunResult> = runs.iter().filter(|r| r.error.is_none()).collect();
        let costs: Vec<f64> = ok.iter().map(|r| r.cost).collect();
        let (avg, min, max) = if costs.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                costs.iter().sum::<f64>() / costs.len() as f64,
                costs.iter().cloned().fold(f64::INFINITY, f64::min),
                costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let feasible = ok.iter().filter(|r| r.feasible).count();
        report.rows.push(ReportRow {
            instance: loaded[instance_idx].0.clone(),
            solver: algo.name().to_string(),
            reps: runs.len() as u64,
            avg,
            min,
            max,
            feasible_rate: if runs.is_empty() {
                0.0
            } else {
                feasible as f64 / runs.len() as f64
            },
            seconds: if runs.is_empty() {
                0.0
            } else {
                runs.iter().map(|r| r.seconds).sum::<f64>() / runs.len() as f64
            },
            errors: (runs.len() - ok.len()) as u64,
        });
    }

    print!("{}", report.to_table());
    for row in report.rows.iter().filter(|r| r.errors > 0) {
        eprintln!(
            "warning: {} on {}: {} failed runs",
            row.solver, row.instance, row.errors
        );
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(report)
}

fn run_one(args: &Args, spec: &RunSpec, instance: &Instance, graph: &ModelGraph) -> RunResult {
    let start = Instant::now();
    let partition = match spec.algo {
        Algo::Bkns => Ok(solve_bkns(instance)),
        Algo::Kated => {
            let mut config = EvoConfig::new(args.time_limit, spec.seed, 1);
            config.alpha = args.alpha;
            config.max_generations = args.generations;
            solve_kated(instance, graph, &config, &RunLogger::disabled()).map(|o| o.best.partition)
        }
        Algo::Kalocalloc => {
            let mut config = LocAllocConfig::new(args.time_limit, spec.seed, instance.epsilon());
            config.gap_target = args.gap;
            config.allocation_time_limit = args.alloc_time_limit;
            config.max_starts = args.starts;
            solve_kalocalloc(instance, &config, &RunLogger::disabled()).and_then(|o| {
                o.partition.ok_or_else(|| {
                    territory_core::CoreError::BadConfig(
                        "no feasible allocation found within budget".into(),
                    )
                })
            })
        }
    };
    match partition {
        Ok(p) => {
            let report = check_feasibility(&p, instance, graph);
            RunResult {
                cell: spec.cell,
                cost: pairwise_cost(&p, instance),
                feasible: report.feasible(),
                seconds: start.elapsed().as_secs_f64(),
                error: None,
            }
        }
        Err(err) => RunResult {
            cell: spec.cell,
            cost: f64::NAN,
            feasible: false,
            seconds: start.elapsed().as_secs_f64(),
            error: Some(err.to_string()),
        },
    }
}
