use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad configuration or command line; exit code 1.
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    /// A pipeline stage failed.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: ecn_core::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        LabError::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) trait Stage<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T> Stage<T> for ecn_core::Result<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|source| LabError::Stage { stage: stage.into(), source })
    }
}
