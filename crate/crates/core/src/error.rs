use thiserror::Error;

/// Errors produced by the analysis library.
///
/// User indices carried by variants are 1-based, matching how links are
/// named in JSON (`H_j_i`).
#[derive(Error, Debug)]
pub enum Error {
    #[error("rank constraint D[{j}][{i}] = {rank} exceeds min(M_{i}, N_{j}) = {limit}")]
    RankExceedsDimension {
        j: usize,
        i: usize,
        rank: usize,
        limit: usize,
    },
    #[error("malformed network: {0}")]
    BadShape(String),
    #[error("operation requires the square case M = N")]
    NotSquareCase,
    #[error("operation requires K = {expected}, got K = {got}")]
    WrongK { expected: usize, got: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("cross-link ranks are not symmetric: D[{j}][{i}] != D[{i}][{j}]")]
    NotSymmetric { j: usize, i: usize },
    #[error("certificate rejected: {0}")]
    CertificateInfeasible(String),
    #[error("precondition fails: {0}")]
    ConditionFails(String),
    #[error("user {user} is dominant: M_{user} exceeds the sum of all other users' antennas")]
    DominantUser { user: usize },
    #[error("replication plan violates the replica connectivity rules: {0}")]
    PlanViolatesDefinition1(String),
    #[error("invalid cooperation partition: {0}")]
    BadPartition(String),
    #[error("replica counts must be uniform for a sum-DoF bound, got {0:?}")]
    NonUniformMu(Vec<usize>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("desired-channel difference of user {user} is rank deficient")]
    DegenerateDesiredDifference { user: usize },
    #[error("realization is not an ergodic pair: {0}")]
    NotErgodicPair(String),
    #[error("null space is empty: {0}")]
    NullSpaceEmpty(String),
    #[error("unsupported scalar domain: {0}")]
    UnsupportedDomain(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
