use helmsweep::error::{AnalyticError, FemError, MeshError, RationalError, SweepError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("insufficient usable snapshots: {0}")]
    Insufficient(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 configuration, 3 solver, 4 insufficient snapshots.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Insufficient(_) => 4,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(m) => CliError::Config(m),
            SweepError::NoPoints => CliError::Config(e.to_string()),
            SweepError::TooFewSnapshots { .. } => CliError::Insufficient(e.to_string()),
            SweepError::Fem(f) => f.into(),
        }
    }
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<RationalError> for CliError {
    fn from(e: RationalError) -> Self {
        match e {
            RationalError::TooFewSamples { .. } | RationalError::Empty => CliError::Insufficient(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        CliError::Solver(e.to_string())
    }
}
