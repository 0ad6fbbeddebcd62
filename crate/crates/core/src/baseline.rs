//! Deterministic recursive geometric bipartitioning baseline ("bkns").
//!
//! Splits the area set along the coordinate axis of larger spread at the
//! prefix whose activity best matches the target share, recursing with
//! floor(k/2) and ceil(k/2) territories. Balance is best effort (prefix
//! granularity); contiguity is not considered.

use crate::instance::Instance;
use crate::partition::Partition;

pub fn solve_bkns(instance: &Instance) -> Partition {
    let n = instance.n();
    let k = instance.k();
    let mut assignment = vec![0usize; n];
    let ids: Vec<usize> = (0..n).collect();
    let mut next_label = 0usize;
    split(instance, ids, k, &mut next_label, &mut assignment);
    debug_assert_eq!(next_label, k);
    Partition::new(assignment, k).expect("labels in range")
}

fn split(
    instance: &Instance,
    mut ids: Vec<usize>,
    k: usize,
    next_label: &mut usize,
    assignment: &mut [usize],
) {
    debug_assert!(ids.len() >= k);
    if k == 1 {
        for id in ids {
            assignment[id] = *next_label;
        }
        *next_label += 1;
        return;
    }

    let coord = |id: usize, use_x: bool| {
        let a = &instance.areas()[id];
        if use_x {
            a.x
        } else {
            a.y
        }
    };
    let spread = |use_x: bool| {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &id in &ids {
            let c = coord(id, use_x);
            min = min.min(c);
            max = max.max(c);
        }
        max - min
    };
    let use_x = spread(true) >= spread(false);
    ids.sort_by(|&a, &b| {
        coord(a, use_x)
            .partial_cmp(&coord(b, use_x))
            .expect("finite coordinates")
            .then(a.cmp(&b))
    });

    let k1 = k / 2;
    let k2 = k - k1;
    let m = ids.len();
    let total: f64 = ids.iter().map(|&id| instance.activity(id)).sum();
    let target = total * k1 as f64 / k as f64;

    // Cut at the prefix closest to the target activity, leaving each side
    // enough areas for its territory count.
    let mut best_p = k1;
    let mut best_diff = f64::INFINITY;
    let mut prefix = 0.0;
    for p in 1..m {
        prefix += instance.activity(ids[p - 1]);
        if p < k1 || m - p < k2 {
            continue;
        }
        let diff = (prefix - target).abs();
        if diff < best_diff {
            best_diff = diff;
            best_p = p;
        }
    }

    let right = ids.split_off(best_p);
    split(instance, ids, k1, next_label, assignment);
    split(instance, right, k2, next_label, assignment);
}
