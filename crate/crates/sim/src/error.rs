use thiserror::Error;

/// Failures of the command-line runner, grouped by exit code.
#[derive(Debug, Error)]
pub enum SimError {
    /// Malformed or inconsistent input (exit code 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// The planner or episode failed (exit code 1).
    #[error("planner failure: {0}")]
    Planner(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn exit_code(&self) -> u8 {
        match self {
            SimError::Config(_) => 2,
            SimError::Planner(_) | SimError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        SimError::Io { path: path.display().to_string(), source }
    }
}

impl From<riskplan::Error> for SimError {
    fn from(e: riskplan::Error) -> Self {
        match e {
            riskplan::Error::InvalidInput(_) | riskplan::Error::Dimension { .. } => SimError::Config(e.to_string()),
            _ => SimError::Planner(e.to_string()),
        }
    }
}
