use std::path::PathBuf;

/// Failures of the pipeline. Input and configuration problems exit with 2,
/// numerical stages with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its content is unusable.
    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },

    #[error("config: {0}")]
    Config(String),

    /// A pipeline stage failed.
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: synthmarket_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        CliError::Parse { path: path.into(), msg: msg.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Tags core errors with the stage that raised them.
pub trait StageExt<T> {
    fn stage(self, name: impl Into<String>) -> Result<T>;
}

impl<T> StageExt<T> for synthmarket_core::Result<T> {
    fn stage(self, name: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage: name.into(), source })
    }
}
