use thiserror::Error;

/// Errors surfaced by kernel, forest, and engine queries.
///
/// Arithmetic never wraps: any value that does not fit the 64-bit index
/// space is reported as `Overflow`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("index arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("depth-0 level has a single address; rank {0} is out of range")]
    RootRank(u64),

    #[error("address text must start with '/': {0:?}")]
    AddressSyntax(String),

    #[error("neighbor rank {rank} out of range for a vertex of degree {degree}")]
    NeighborRange { rank: u64, degree: u64 },

    #[error("pool 0 holds exactly one component; rank {0} is out of range")]
    PoolZeroRank(u64),

    #[error("component rank {rank} out of range for a batch of {size} components")]
    ComponentRank { rank: u64, size: u64 },

    #[error("vertex index {index} out of range for factor {factor}")]
    VertexRange { factor: u64, index: u64 },

    #[error("ball depth {requested} exceeds the configured maximum {max}")]
    DepthCap { requested: u64, max: u64 },

    #[error("memo budget of {budget} entries exceeded while {during}")]
    BudgetExceeded { budget: u64, during: &'static str },

    #[error("family rejected: {0} violation(s); run validate for details")]
    InvalidFamily(usize),

    #[error("regular-tree families need degree at least 1")]
    LambdaZero,

    #[error("simulation config rejected: {0}")]
    InvalidSim(String),

    #[error("trace malformed at line {line}: {reason}")]
    TraceSyntax { line: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
