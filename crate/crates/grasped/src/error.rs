use std::path::PathBuf;

/// Errors surfaced by the command-line tool, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config keys or hyperparameter values.
    #[error("{0}")]
    Usage(String),
    /// Missing or malformed input data.
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Training or scoring produced non-finite values or failed to converge.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<grasped_core::Error> for CliError {
    fn from(e: grasped_core::Error) -> Self {
        use grasped_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParameter(_) => CliError::Usage(msg),
            E::EigenNoConvergence { .. }
            | E::NotPositiveDefinite { .. }
            | E::NonFinite { .. }
            | E::NonFiniteTarget(_)
            | E::SpectrumOutOfRange(_) => CliError::Numerical(msg),
            _ => CliError::Data(msg),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
