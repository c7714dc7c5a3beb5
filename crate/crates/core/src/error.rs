use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration invariant does not hold. `invariant` is a stable
    /// machine-readable name, `detail` is for humans.
    #[error("invalid config ({invariant}): {detail}")]
    InvalidConfig {
        invariant: &'static str,
        detail: String,
    },

    #[error("row {row} sums to zero and cannot be normalized")]
    DegenerateRow { row: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("negative entry {value} at row {row}, column {column}")]
    NegativeEntry {
        row: usize,
        column: usize,
        value: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("allocation matrix is empty")]
    EmptyMatrix,

    #[error("all mechanism scores are zero")]
    DegenerateScores,

    #[error("distribution has no positive entry")]
    DegenerateDistribution,

    #[error("attack needs {needed} voters, only {available} available")]
    NotEnoughVoters { needed: usize, available: usize },

    #[error("attack needs {needed} projects, only {available} available")]
    NotEnoughProjects { needed: usize, available: usize },

    #[error("epsilon {epsilon} is infeasible for voter {voter} with weight {weight}")]
    InfeasibleEpsilon {
        voter: usize,
        weight: f64,
        epsilon: f64,
    },

    #[error("project attack needs at least 2 colluding projects, got {0}")]
    TooFewColluders(usize),

    #[error("attack spec does not match the requested transform: {0}")]
    AttackKindMismatch(&'static str),

    #[error("iteration {index} failed: {source}")]
    IterationFailed {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} iterations failed (limit is 1%)")]
    RunFailed { failed: usize, total: usize },

    #[error("could not build worker pool: {0}")]
    ThreadPool(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidConfig {
            invariant,
            detail: detail.into(),
        }
    }
}
