use std::path::PathBuf;

use thiserror::Error;

/// Failures of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: semmap_core::Error,
    },
    #[error("missing intermediate {}: run `semmap {hint}` first", path.display())]
    Missing { path: PathBuf, hint: &'static str },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 2 for configuration, 4 for numerical breakdown, 3 for everything
    /// data-related.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage {
                source: semmap_core::Error::Numerical(_),
                ..
            } => 4,
            _ => 3,
        }
    }
}

/// Attaches a stage name to a core error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for semmap_core::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
