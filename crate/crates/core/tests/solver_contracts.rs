//! Cross-module contracts: solvers against the exhaustive oracle, and
//! operator feasibility under composition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use territory_core::evo::{
    combine, initial_partition, local_search, solve_kated, EvoConfig, Individual,
};
use territory_core::eval::{check_feasibility, pairwise_cost};
use territory_core::graph::build_model;
use territory_core::instance::{BasicArea, Instance};
use territory_core::localloc::{solve_kalocalloc, LocAllocConfig};
use territory_core::oracle::{enumerate_optimum, OracleObjective};
use territory_core::runlog::RunLogger;
use territory_core::{baseline, ModelGraph};

fn random_instance(n: usize, k: usize, epsilon: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas = (0..n)
        .map(|id| BasicArea {
            id,
            x: rng.random_range(0.0..100.0),
            y: rng.random_range(0.0..100.0),
            activity: rng.random_range(1.0..10.0),
        })
        .collect();
    Instance::new(areas, k, epsilon, None).unwrap()
}

// Clustered layout matching the synthetic generator: cluster anchors in a
// square, areas scattered around a random anchor. Uniform activity keeps
// the ceiling balance bound and the allocation activity cap aligned at
// these sizes.
fn clustered_instance(n: usize, k: usize, epsilon: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
        .collect();
    let areas = (0..n)
        .map(|id| {
            let (cx, cy) = anchors[rng.random_range(0..anchors.len())];
            BasicArea {
                id,
                x: cx + rng.random_range(-8.0..8.0),
                y: cy + rng.random_range(-8.0..8.0),
                activity: 1.0,
            }
        })
        .collect();
    Instance::new(areas, k, epsilon, None).unwrap()
}

fn model(inst: &Instance) -> ModelGraph {
    build_model(inst, 5.0, 20).unwrap()
}

#[test]
fn combine_offspring_is_always_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..15 {
        let inst = random_instance(14, 3, 0.2, 100 + seed);
        let g = model(&inst);
        let mut parents = Vec::new();
        while parents.len() < 2 {
            let p = initial_partition(&g, &inst, &mut rng);
            if check_feasibility(&p, &inst, &g).feasible() {
                parents.push(Individual::evaluate(
                    local_search(&p, &g, &inst),
                    &inst,
                    &g,
                    0.1,
                ));
            }
        }
        for _ in 0..10 {
            let child = combine(&parents[0], &parents[1], &g, &inst, &mut rng, 0.1);
            let report = check_feasibility(&child.partition, &inst, &g);
            assert!(report.feasible(), "seed {seed}");
        }
    }
}

#[test]
fn kated_reaches_oracle_optimum_on_tiny_instance() {
    let inst = random_instance(8, 2, 0.05, 9);
    let g = model(&inst);
    let oracle = enumerate_optimum(&inst, &g, OracleObjective::Fitness { alpha: 0.1 })
        .unwrap()
        .best
        .expect("feasible tiny instance");
    let mut hits = 0;
    for seed in 0..5 {
        let mut config = EvoConfig::new(30.0, seed, 1);
        config.max_generations = Some(2000);
        let out = solve_kated(&inst, &g, &config, &RunLogger::disabled()).unwrap();
        assert!(out.feasible);
        assert!(out.best.fitness >= oracle.1 - 1e-9, "oracle must lower-bound the solver");
        if (out.best.fitness - oracle.1).abs() <= 1e-9 * oracle.1.max(1.0) {
            hits += 1;
        }
    }
    assert!(hits >= 4, "only {hits}/5 seeds reached the optimum");
}

#[test]
fn kalocalloc_close_to_oracle_on_tiny_instances() {
    let mut within = 0;
    let total = 10;
    for seed in 0..total {
        let inst = clustered_instance(8, 2, 0.05, 60 + seed);
        let g = model(&inst);
        let oracle = enumerate_optimum(&inst, &g, OracleObjective::Pairwise).unwrap();
        let Some((_, opt)) = oracle.best else { continue };
        let mut cfg = LocAllocConfig::new(20.0, seed, 0.05);
        cfg.max_starts = Some(8);
        let out = solve_kalocalloc(&inst, &cfg, &RunLogger::disabled()).unwrap();
        let cost = out.pairwise_cost;
        assert!(cost >= opt - 1e-9, "oracle must lower-bound the solver");
        if cost <= opt * 1.10 + 1e-9 {
            within += 1;
        }
    }
    assert!(within * 10 >= total * 9, "{within}/{total} within 10% of the oracle");
}

#[test]
fn oracle_lower_bounds_every_solver() {
    for seed in 0..5 {
        let inst = random_instance(9, 3, 0.1, 200 + seed);
        let g = model(&inst);
        let oracle = enumerate_optimum(&inst, &g, OracleObjective::Pairwise).unwrap();
        let Some((_, opt)) = oracle.best else { continue };

        let bkns = baseline::solve_bkns(&inst);
        if check_feasibility(&bkns, &inst, &g).feasible() {
            assert!(pairwise_cost(&bkns, &inst) >= opt - 1e-9);
        }

        let mut config = EvoConfig::new(10.0, seed, 1);
        config.max_generations = Some(400);
        let kated = solve_kated(&inst, &g, &config, &RunLogger::disabled()).unwrap();
        if kated.feasible {
            assert!(pairwise_cost(&kated.best.partition, &inst) >= opt - 1e-9);
        }
    }
}
