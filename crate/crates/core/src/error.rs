use alloc::string::String;

/// Errors produced by the solvers, generators, simulator and compiler passes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("numerical instability: {0}")]
    Unstable(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("width mismatch: expected {expected} qubits, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("post-selected branch has zero probability")]
    ZeroProbability,
    #[error("circuit too wide for dense verification: {0} qubits")]
    TooWide(usize),
    #[error("unknown {0}")]
    Unknown(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
