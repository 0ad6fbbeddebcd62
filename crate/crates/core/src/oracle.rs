//! Exhaustive ground truth on tiny instances.
//!
//! Enumerates every surjective assignment of areas to unlabeled territories
//! (restricted growth strings, so each unordered partition appears once),
//! filters by feasibility, and returns the optimum. Correctness over speed.

use crate::error::CoreError;
use crate::eval::{balance_bound, count_components, fitness, pairwise_cost};
use crate::graph::ModelGraph;
use crate::instance::Instance;
use crate::localloc::CenterSet;
use crate::partition::Partition;

pub const MAX_N: usize = 14;
pub const MAX_K: usize = 4;

#[derive(Debug, Clone)]
pub enum OracleObjective<'a> {
    /// Minimum pairwise travel cost over balanced, contiguous partitions.
    Pairwise,
    /// Minimum penalized objective over balanced, contiguous partitions.
    Fitness { alpha: f64 },
    /// Minimum activity-weighted squared distance to the given centers over
    /// labeled assignments obeying the allocation activity cap; each
    /// center's own area stays with its center.
    CompactnessGivenCenters { centers: &'a CenterSet },
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    /// Optimal partition and objective value; None is an infeasibility
    /// certificate (no partition passed the filters).
    pub best: Option<(Partition, f64)>,
    /// Number of partitions that passed all filters.
    pub feasible_count: u64,
    /// Number of candidate partitions enumerated.
    pub enumerated: u64,
}

/// Walks every surjective assignment of n items to k unlabeled blocks in
/// restricted-growth order (block ids appear in order of first use).
pub fn for_each_surjective_partition<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    assert!(k >= 1 && k <= n);
    let mut labels = vec![0usize; n];
    // `used` counts distinct labels assigned so far; position i may reuse
    // any of them or introduce label `used`.
    fn rec<F: FnMut(&[usize])>(labels: &mut Vec<usize>, i: usize, used: usize, k: usize, f: &mut F) {
        let n = labels.len();
        if i == n {
            if used == k {
                f(labels);
            }
            return;
        }
        // Not enough positions left to introduce the remaining labels.
        if k - used > n - i {
            return;
        }
        let top = used.min(k - 1);
        for label in 0..=top {
            labels[i] = label;
            rec(labels, i + 1, used.max(label + 1), k, f);
        }
    }
    rec(&mut labels, 0, 0, k, &mut f);
}

pub fn enumerate_optimum(
    instance: &Instance,
    graph: &ModelGraph,
    objective: OracleObjective,
) -> Result<OracleOutcome, CoreError> {
    let n = instance.n();
    let k = match &objective {
        OracleObjective::CompactnessGivenCenters { centers } => centers.k(),
        _ => instance.k(),
    };
    if n > MAX_N || k > MAX_K {
        return Err(CoreError::OracleTooLarge { n, k });
    }

    match objective {
        OracleObjective::Pairwise => Ok(partition_scan(instance, graph, |p| pairwise_cost(p, instance))),
        OracleObjective::Fitness { alpha } => {
            Ok(partition_scan(instance, graph, |p| fitness(p, instance, graph, alpha)))
        }
        OracleObjective::CompactnessGivenCenters { centers } => compactness_scan(instance, centers),
    }
}

fn partition_scan<F: Fn(&Partition) -> f64>(
    instance: &Instance,
    graph: &ModelGraph,
    value: F,
) -> OracleOutcome {
    let n = instance.n();
    let k = instance.k();
    let bound = balance_bound(instance);
    let mut best: Option<(Partition, f64)> = None;
    let mut feasible_count = 0u64;
    let mut enumerated = 0u64;
    for_each_surjective_partition(n, k, |labels| {
        enumerated += 1;
        let p = Partition::new(labels.to_vec(), k).expect("labels in range");
        let max_act = p
            .territory_activities(instance)
            .into_iter()
            .fold(0.0f64, f64::max);
        if max_act > bound {
            return;
        }
        if count_components(&p, graph).iter().any(|&c| c != 1) {
            return;
        }
        feasible_count += 1;
        let v = value(&p);
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((p, v));
        }
    });
    OracleOutcome { best, feasible_count, enumerated }
}

fn compactness_scan(instance: &Instance, centers: &CenterSet) -> Result<OracleOutcome, CoreError> {
    let n = instance.n();
    let k = centers.k();
    let cap = (1.0 + instance.epsilon()) * instance.total_activity() / k as f64;

    let mut territory_of_center = vec![usize::MAX; n];
    for (j, &c) in centers.centers().iter().enumerate() {
        territory_of_center[c] = j;
    }
    let free: Vec<usize> = (0..n).filter(|&i| territory_of_center[i] == usize::MAX).collect();

    let mut assignment = vec![0usize; n];
    let mut loads = vec![0.0f64; k];
    for (j, &c) in centers.centers().iter().enumerate() {
        assignment[c] = j;
        loads[j] += instance.activity(c);
    }
    if loads.iter().any(|&l| l > cap) {
        return Ok(OracleOutcome { best: None, feasible_count: 0, enumerated: 0 });
    }

    let cost = |i: usize, j: usize| {
        let d = instance.travel_time(i, centers.centers()[j]);
        d * d * instance.activity(i)
    };

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut feasible_count = 0u64;
    let mut enumerated = 0u64;

    fn rec(
        idx: usize,
        free: &[usize],
        k: usize,
        cap: f64,
        instance: &Instance,
        cost: &dyn Fn(usize, usize) -> f64,
        assignment: &mut Vec<usize>,
        loads: &mut Vec<f64>,
        value: f64,
        best: &mut Option<(Vec<usize>, f64)>,
        feasible_count: &mut u64,
        enumerated: &mut u64,
    ) {
        if idx == free.len() {
            *enumerated += 1;
            *feasible_count += 1;
            if best.as_ref().map_or(true, |(_, bv)| value < *bv) {
                *best = Some((assignment.clone(), value));
            }
            return;
        }
        let area = free[idx];
        let a = instance.activity(area);
        for j in 0..k {
            if loads[j] + a > cap {
                continue;
            }
            assignment[area] = j;
            loads[j] += a;
            rec(
                idx + 1,
                free,
                k,
                cap,
                instance,
                cost,
                assignment,
                loads,
                value + cost(area, j),
                best,
                feasible_count,
                enumerated,
            );
            loads[j] -= a;
        }
    }

    rec(
        0,
        &free,
        k,
        cap,
        instance,
        &cost,
        &mut assignment,
        &mut loads,
        0.0,
        &mut best,
        &mut feasible_count,
        &mut enumerated,
    );

    Ok(OracleOutcome {
        best: best.map(|(a, v)| (Partition::new(a, k).expect("labels in range"), v)),
        feasible_count,
        enumerated,
    })
}
