//! Synthetic instance generator.
//!
//! Cluster anchors are sampled uniformly in a square, areas around a
//! random anchor with Gaussian spread, activities log-uniform in [1, 100].
//! No travel matrix is written; loaders fall back to Euclidean distance.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use territory_core::instance::{BasicArea, Instance};

const SQUARE_SIDE: f64 = 1000.0;
const ACTIVITY_MAX: f64 = 100.0;

pub fn build(
    n: usize,
    k: usize,
    seed: u64,
    clusters: Option<usize>,
    spread: f64,
    epsilon: f64,
) -> Result<Instance> {
    if k < 2 || n < k {
        bail!("need n >= k >= 2, got n={n}, k={k}");
    }
    // Default geometry: one cluster per ~20 areas so territories span
    // several localities, as in region-scale planning data.
    let clusters = clusters.unwrap_or_else(|| k.max(n / 20)).max(1);
    if !(spread >= 0.0) {
        bail!("spread must be >= 0, got {spread}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors: Vec<(f64, f64)> = (0..clusters)
        .map(|_| {
            (
                rng.random_range(0.0..SQUARE_SIDE),
                rng.random_range(0.0..SQUARE_SIDE),
            )
        })
        .collect();
    let normal = Normal::new(0.0, spread.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let areas: Vec<BasicArea> = (0..n)
        .map(|id| {
            let (cx, cy) = anchors[rng.random_range(0..clusters)];
            let x = cx + normal.sample(&mut rng);
            let y = cy + normal.sample(&mut rng);
            let activity = ACTIVITY_MAX.powf(rng.random::<f64>());
            BasicArea { id, x, y, activity }
        })
        .collect();
    Ok(Instance::new(areas, k, epsilon, None)?)
}

pub fn run(
    n: usize,
    k: usize,
    seed: u64,
    clusters: Option<usize>,
    spread: f64,
    epsilon: f64,
    out: &Path,
) -> Result<()> {
    let instance = build(n, k, seed, clusters, spread, epsilon)?;
    instance
        .save(out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {}: n={} k={} epsilon={} total_activity={:.3}",
        out.display(),
        instance.n(),
        instance.k(),
        instance.epsilon(),
        instance.total_activity()
    );
    Ok(())
}
