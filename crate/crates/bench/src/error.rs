use std::path::PathBuf;

/// Failures that end a command. Each class maps to its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("missing artifact {}: run `{stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("transport: {0}")]
    Transport(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("incomplete grid: {0} method/size/query cells have no score")]
    IncompleteGrid(usize),
    #[error("io on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data(_) | BenchError::MissingArtifact { .. } | BenchError::Io { .. } => 3,
            BenchError::Transport(_) => 4,
            BenchError::Backend(_) => 5,
            BenchError::IncompleteGrid(_) => 6,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> BenchError {
        let path = path.into();
        move |source| BenchError::Io { path, source }
    }

    pub fn data(msg: impl std::fmt::Display) -> BenchError {
        BenchError::Data(msg.to_string())
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
