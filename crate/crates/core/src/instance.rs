//! Problem instances: basic areas, activities, and pairwise travel times.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// An atomic geographic unit to be assigned to exactly one territory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicArea {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Nonnegative workload weight of the area.
    pub activity: f64,
}

#[derive(Debug, Clone)]
enum Travel {
    /// Row-major n*n symmetric matrix with zero diagonal.
    Matrix(Vec<f64>),
    /// No matrix supplied; Euclidean distance between coordinates stands in
    /// for travel time (length units read as seconds).
    Euclidean,
}

/// A territory design instance: the set of basic areas, the number of
/// territories to plan, the imbalance tolerance, and pairwise travel times.
///
/// Immutable after construction; cheap to share across worker threads.
#[derive(Debug, Clone)]
pub struct Instance {
    areas: Vec<BasicArea>,
    k: usize,
    epsilon: f64,
    travel: Travel,
    total_activity: f64,
}

/// On-disk JSON document shape for instances.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    areas: Vec<BasicArea>,
    k: usize,
    epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    travel: Option<Vec<f64>>,
}

impl Instance {
    /// Validates and builds an instance. An asymmetric travel matrix is
    /// symmetrized as (d(i,j)+d(j,i))/2; a missing matrix selects the
    /// Euclidean fallback.
    pub fn new(
        areas: Vec<BasicArea>,
        k: usize,
        epsilon: f64,
        travel: Option<Vec<f64>>,
    ) -> Result<Self, CoreError> {
        if areas.is_empty() {
            return Err(CoreError::EmptyInstance);
        }
        let n = areas.len();
        let mut sorted = areas;
        sorted.sort_by_key(|a| a.id);
        for (i, a) in sorted.iter().enumerate() {
            if a.id != i {
                return Err(CoreError::BadAreaIds(format!(
                    "expected id {i} at position {i}, found {}",
                    a.id
                )));
            }
            if !a.activity.is_finite() || a.activity < 0.0 {
                return Err(CoreError::BadAreaValue {
                    id: a.id,
                    field: "activity",
                    value: a.activity,
                });
            }
            if !a.x.is_finite() {
                return Err(CoreError::BadAreaValue { id: a.id, field: "x", value: a.x });
            }
            if !a.y.is_finite() {
                return Err(CoreError::BadAreaValue { id: a.id, field: "y", value: a.y });
            }
        }
        if k < 1 || k > n {
            return Err(CoreError::BadTerritoryCount { k, n });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(CoreError::BadEpsilon(epsilon));
        }
        let travel = match travel {
            None => Travel::Euclidean,
            Some(mut m) => {
                if m.len() != n * n {
                    return Err(CoreError::BadTravelShape { got: m.len(), expected: n * n });
                }
                for i in 0..n {
                    for j in 0..n {
                        let v = m[i * n + j];
                        if !v.is_finite() || v < 0.0 {
                            return Err(CoreError::BadTravelEntry { i, j, value: v });
                        }
                    }
                    let d = m[i * n + i];
                    if d != 0.0 {
                        return Err(CoreError::BadTravelDiagonal { i, value: d });
                    }
                }
                // Direction-averaged symmetrization.
                for i in 0..n {
                    for j in (i + 1)..n {
                        let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
                        m[i * n + j] = avg;
                        m[j * n + i] = avg;
                    }
                }
                Travel::Matrix(m)
            }
        };
        let total_activity = sorted.iter().map(|a| a.activity).sum();
        Ok(Instance { areas: sorted, k, epsilon, travel, total_activity })
    }

    pub fn n(&self) -> usize {
        self.areas.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn areas(&self) -> &[BasicArea] {
        &self.areas
    }

    pub fn activity(&self, i: usize) -> f64 {
        self.areas[i].activity
    }

    /// Sum of all activity indices.
    pub fn total_activity(&self) -> f64 {
        self.total_activity
    }

    /// Symmetric travel time between areas `i` and `j`.
    #[inline]
    pub fn travel_time(&self, i: usize, j: usize) -> f64 {
        match &self.travel {
            Travel::Matrix(m) => m[i * self.areas.len() + j],
            Travel::Euclidean => {
                let a = &self.areas[i];
                let b = &self.areas[j];
                (a.x - b.x).hypot(a.y - b.y)
            }
        }
    }

    /// True when no travel matrix was supplied and Euclidean distance is in use.
    pub fn uses_euclidean_travel(&self) -> bool {
        matches!(self.travel, Travel::Euclidean)
    }

    /// Same instance with a different imbalance tolerance.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, CoreError> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(CoreError::BadEpsilon(epsilon));
        }
        let mut out = self.clone();
        out.epsilon = epsilon;
        Ok(out)
    }

    /// Same instance with a different territory count.
    pub fn with_k(&self, k: usize) -> Result<Self, CoreError> {
        if k < 1 || k > self.n() {
            return Err(CoreError::BadTerritoryCount { k, n: self.n() });
        }
        let mut out = self.clone();
        out.k = k;
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Instance::new(file.areas, file.k, file.epsilon, file.travel)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            areas: self.areas.clone(),
            k: self.k,
            epsilon: self.epsilon,
            travel: match &self.travel {
                Travel::Matrix(m) => Some(m.clone()),
                Travel::Euclidean => None,
            },
        };
        let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(id: usize, x: f64, y: f64, activity: f64) -> BasicArea {
        BasicArea { id, x, y, activity }
    }

    #[test]
    fn euclidean_fallback_when_no_matrix() {
        let inst = Instance::new(
            vec![area(0, 0.0, 0.0, 1.0), area(1, 3.0, 4.0, 2.0)],
            2,
            0.05,
            None,
        )
        .unwrap();
        assert!(inst.uses_euclidean_travel());
        assert_eq!(inst.travel_time(0, 1), 5.0);
        assert_eq!(inst.travel_time(1, 0), 5.0);
        assert_eq!(inst.total_activity(), 3.0);
    }

    #[test]
    fn asymmetric_matrix_is_symmetrized() {
        let inst = Instance::new(
            vec![area(0, 0.0, 0.0, 1.0), area(1, 1.0, 0.0, 1.0)],
            2,
            0.0,
            Some(vec![0.0, 10.0, 20.0, 0.0]),
        )
        .unwrap();
        assert_eq!(inst.travel_time(0, 1), 15.0);
        assert_eq!(inst.travel_time(1, 0), 15.0);
        assert!(!inst.uses_euclidean_travel());
    }

    #[test]
    fn rejects_bad_ids_and_values() {
        let err = Instance::new(vec![area(1, 0.0, 0.0, 1.0)], 1, 0.0, None).unwrap_err();
        assert!(matches!(err, CoreError::BadAreaIds(_)));

        let err = Instance::new(
            vec![area(0, 0.0, 0.0, -1.0), area(1, 1.0, 0.0, 1.0)],
            1,
            0.0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::BadAreaValue { field: "activity", .. }));

        let err = Instance::new(
            vec![area(0, 0.0, 0.0, 1.0), area(1, 1.0, 0.0, 1.0)],
            3,
            0.0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::BadTerritoryCount { k: 3, n: 2 }));
    }

    #[test]
    fn rejects_bad_travel() {
        let areas = vec![area(0, 0.0, 0.0, 1.0), area(1, 1.0, 0.0, 1.0)];
        let err = Instance::new(areas.clone(), 2, 0.0, Some(vec![0.0, 1.0])).unwrap_err();
        assert!(matches!(err, CoreError::BadTravelShape { .. }));

        let err =
            Instance::new(areas.clone(), 2, 0.0, Some(vec![0.5, 1.0, 1.0, 0.0])).unwrap_err();
        assert!(matches!(err, CoreError::BadTravelDiagonal { i: 0, .. }));

        let err =
            Instance::new(areas, 2, 0.0, Some(vec![0.0, f64::NAN, 1.0, 0.0])).unwrap_err();
        assert!(matches!(err, CoreError::BadTravelEntry { .. }));
    }

    #[test]
    fn json_round_trip_preserves_data() {
        let inst = Instance::new(
            vec![area(0, 0.0, 0.5, 1.25), area(1, 2.0, 0.0, 3.0), area(2, 1.0, 1.0, 2.0)],
            2,
            0.05,
            None,
        )
        .unwrap();
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back.n(), 3);
        assert_eq!(back.k(), 2);
        assert_eq!(back.epsilon(), 0.05);
        assert_eq!(back.areas(), inst.areas());
        assert_eq!(back.to_json(), text);
    }
}
