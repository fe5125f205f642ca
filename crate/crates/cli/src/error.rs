use std::fmt;
use std::path::{Path, PathBuf};

use crate::config::ConfigError;

/// Pipeline phase an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Decompose,
    Optimize,
    Assess,
    Ladder,
    Family,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Simulate => "simulate",
            Stage::Decompose => "decompose",
            Stage::Optimize => "optimize",
            Stage::Assess => "assess",
            Stage::Ladder => "ladder",
            Stage::Family => "family",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: nlkw_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Stage { source, .. } => match source {
                nlkw_core::Error::Parameter { .. } | nlkw_core::Error::Capability { .. } => 2,
                _ => 3,
            },
            RunError::Io { .. } | RunError::Format { .. } => 4,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, RunError>;
}

impl<T> StageExt<T> for nlkw_core::Result<T> {
    fn stage(self, stage: Stage) -> Result<T, RunError> {
        self.map_err(|source| RunError::Stage { stage, source })
    }
}
