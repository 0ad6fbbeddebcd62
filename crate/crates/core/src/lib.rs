//! Territory design optimization: partition basic areas into balanced,
//! contiguous territories with small pairwise travel times.
//!
//! Two solvers share one problem model: an evolutionary graph partitioner
//! (`evo`, "kated") working on a Kruskal-derived proximity graph, and a
//! multi-start location-allocation scheme (`localloc`, "kalocalloc") with an
//! exact branch-and-bound allocation step. A deterministic recursive
//! geometric baseline (`baseline`, "bkns") and an exhaustive oracle for tiny
//! instances round out the suite.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod evo;
pub mod graph;
pub mod instance;
pub mod localloc;
pub mod oracle;
pub mod partition;
pub mod runlog;
pub mod solution;

pub use error::CoreError;
pub use eval::{balance_bound, check_feasibility, cut_size, fitness, pairwise_cost, FeasibilityReport};
pub use graph::{build_model, kruskal_mst, ModelGraph};
pub use instance::{BasicArea, Instance};
pub use partition::Partition;

/// Stream-indexed seed derivation (splitmix64 finalizer) so workers,
/// multi-starts, and benchmark repetitions draw independent streams from
/// one user seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
