use std::path::PathBuf;

/// Failures of the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("simulation needs {width} qubits, above the cap of {cap}")]
    ResourceCap { width: usize, cap: usize },
    #[error("circuit text line {line}: {msg}")]
    CircuitText { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] qdde_core::Error),
}

impl CliError {
    /// Process exit status: 2 for bad scenarios, 3 for the width cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario { .. } | CliError::InvalidScenario(_) => 2,
            CliError::ResourceCap { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
