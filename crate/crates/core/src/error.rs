use thiserror::Error;

/// Errors produced while validating or operating on problem data.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("instance has no basic areas")]
    EmptyInstance,

    #[error("basic area ids are not dense and unique: {0}")]
    BadAreaIds(String),

    #[error("area {id}: {field} must be finite and nonnegative, got {value}")]
    BadAreaValue { id: usize, field: &'static str, value: f64 },

    #[error("territory count k={k} out of range (need 1 <= k <= n={n})")]
    BadTerritoryCount { k: usize, n: usize },

    #[error("epsilon must be finite and >= 0, got {0}")]
    BadEpsilon(f64),

    #[error("travel matrix has {got} entries, expected {expected} (n*n)")]
    BadTravelShape { got: usize, expected: usize },

    #[error("travel[{i}][{j}] = {value} is not a finite nonnegative time")]
    BadTravelEntry { i: usize, j: usize, value: f64 },

    #[error("travel diagonal entry [{i}][{i}] = {value}, expected 0")]
    BadTravelDiagonal { i: usize, value: f64 },

    #[error("assignment value {value} at area {area} outside 0..{k}")]
    BadAssignment { area: usize, value: usize, k: usize },

    #[error("assignment length {got} does not match instance size {expected}")]
    BadAssignmentLength { got: usize, expected: usize },

    #[error("graph is disconnected; unreached component: {}", format_component(.component))]
    GraphDisconnected { component: Vec<usize> },

    #[error("model construction needs at least 2 areas, got {0}")]
    ModelTooSmall(usize),

    #[error("model parameter {name} must be > 1, got {value}")]
    BadModelParameter { name: &'static str, value: f64 },

    #[error("edge ({u},{v}) has non-finite length {length}")]
    NonFiniteEdge { u: usize, v: usize, length: f64 },

    #[error("territory {0} is empty")]
    EmptyTerritory(usize),

    #[error("duplicate center id {0}")]
    DuplicateCenter(usize),

    #[error("center id {id} out of range 0..{n}")]
    BadCenterId { id: usize, n: usize },

    #[error("seeding stalled: only {found} of {want} centers have positive distance weight")]
    DegenerateSeeding { found: usize, want: usize },

    #[error("instance too large for exhaustive enumeration: n={n}, k={k} (limits n<=14, k<=4)")]
    OracleTooLarge { n: usize, k: usize },

    #[error("invalid solver configuration: {0}")]
    BadConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_component(component: &[usize]) -> String {
    const SHOW: usize = 8;
    let shown: Vec<String> = component.iter().take(SHOW).map(|v| v.to_string()).collect();
    if component.len() > SHOW {
        format!("[{}, ... {} nodes total]", shown.join(", "), component.len())
    } else {
        format!("[{}]", shown.join(", "))
    }
}
