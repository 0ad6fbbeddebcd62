//! The shared solution representation: an assignment of areas to territories.

use crate::error::CoreError;
use crate::instance::Instance;

/// Maps every basic area to one of `k` territories.
///
/// Construction only checks label ranges; whether every territory is
/// non-empty, balanced, or contiguous is a feasibility question answered by
/// [`crate::eval::check_feasibility`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self, CoreError> {
        for (area, &t) in assignment.iter().enumerate() {
            if t >= k {
                return Err(CoreError::BadAssignment { area, value: t, k });
            }
        }
        Ok(Partition { assignment, k })
    }

    /// All areas in territory 0.
    pub fn single_territory(n: usize) -> Self {
        Partition { assignment: vec![0; n], k: 1 }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn territory_of(&self, area: usize) -> usize {
        self.assignment[area]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn set(&mut self, area: usize, territory: usize) {
        debug_assert!(territory < self.k);
        self.assignment[area] = territory;
    }

    /// Member lists per territory, each ascending by area id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (area, &t) in self.assignment.iter().enumerate() {
            out[t].push(area);
        }
        out
    }

    /// Total activity per territory.
    pub fn territory_activities(&self, instance: &Instance) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (area, &t) in self.assignment.iter().enumerate() {
            out[t] += instance.activity(area);
        }
        out
    }

    /// True when every territory id in 0..k appears at least once.
    pub fn is_surjective(&self) -> bool {
        let mut seen = vec![false; self.k];
        for &t in &self.assignment {
            seen[t] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Relabels territories in order of first appearance (0, 1, ...).
    /// Two partitions that differ only by territory naming canonicalize
    /// to the same assignment.
    pub fn canonicalize(&self) -> Partition {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let assignment = self
            .assignment
            .iter()
            .map(|&t| {
                if map[t] == usize::MAX {
                    map[t] = next;
                    next += 1;
                }
                map[t]
            })
            .collect();
        Partition { assignment, k: self.k }
    }
}
