use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("malformed file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: pinnlab::Error,
    },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<pinnlab::Error> for CliError {
    fn from(source: pinnlab::Error) -> Self {
        CliError::Core {
            context: "computation failed".into(),
            source,
        }
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(path.to_path_buf())
        } else {
            CliError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// 0 success, 2 bad config, 3 missing input, 4 numeric fault,
    /// 5 non-convergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use pinnlab::Error as E;
        match self {
            CliError::Config(_) | CliError::Format { .. } => 2,
            CliError::MissingInput(_) => 3,
            CliError::Io { .. } => 1,
            CliError::Core { source, .. } => match source {
                E::NonConvergence { .. } => 5,
                E::Divergence { .. } | E::NonFiniteGradient { .. } | E::NonFiniteInput { .. } => 4,
                E::MissingSolution(_) => 3,
                _ => 2,
            },
        }
    }
}

pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, pinnlab::Error> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
