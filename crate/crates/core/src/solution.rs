//! Solution files written by every solver.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::eval::{check_feasibility, fitness, pairwise_cost};
use crate::graph::ModelGraph;
use crate::instance::Instance;
use crate::partition::Partition;

/// On-disk solution document; identical schema for all solvers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Solution {
    pub assignment: Vec<usize>,
    /// Sum of pairwise within-territory travel times.
    pub objective: f64,
    /// Penalized objective at the reported alpha.
    pub fitness: f64,
    /// Balanced and contiguous (an empty territory counts as non-contiguous).
    pub feasible: bool,
    pub solver: String,
    pub seed: u64,
    /// Whole seconds of wall time; floored so repeated identical runs
    /// serialize identically.
    pub wall_seconds: f64,
}

impl Solution {
    pub fn from_partition(
        partition: &Partition,
        instance: &Instance,
        graph: &ModelGraph,
        alpha: f64,
        solver: &str,
        seed: u64,
        wall_seconds: f64,
    ) -> Solution {
        let report = check_feasibility(partition, instance, graph);
        Solution {
            assignment: partition.assignment().to_vec(),
            objective: pairwise_cost(partition, instance),
            fitness: fitness(partition, instance, graph, alpha),
            feasible: report.feasible(),
            solver: solver.to_string(),
            seed,
            wall_seconds: wall_seconds.floor(),
        }
    }

    pub fn partition(&self, k: usize) -> Result<Partition, CoreError> {
        Partition::new(self.assignment.clone(), k)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
