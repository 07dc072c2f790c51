use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weight {index} must be strictly positive, got {value}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("zero vector under the angular distance")]
    ZeroVector,

    #[error("k = {k} exceeds dataset cardinality n = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("derived family unusable: P1 = {p1} <= P2 = {p2}")]
    UnusableFamily { p1: f64, p2: f64 },

    #[error("weight vector {target} is not assignable to base {base}")]
    Unassignable { base: u32, target: u32 },

    #[error("tau = {tau} is infeasible: weight vector {weight_id} fits no candidate group")]
    InfeasibleTau { tau: u32, weight_id: u32 },

    #[error("unknown weight vector id {0}")]
    UnknownWeightVector(u32),

    #[error("unknown table {table} in group {group}")]
    UnknownTable { group: usize, table: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("dataset digest does not match the digest recorded in the index")]
    DigestMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 invalid config, 3 infeasible plan, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleTau { .. } => 3,
            Error::Io(_) | Error::Format(_) | Error::DigestMismatch => 4,
            _ => 2,
        }
    }
}
