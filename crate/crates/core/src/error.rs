use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset is empty after filtering")]
    EmptyDataset,

    #[error("requested {requested} negatives but only {available} items are sampleable")]
    InsufficientNegatives { requested: usize, available: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite loss in epoch {epoch}, batch {batch} (first user {user}, positive {item})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        user: usize,
        item: usize,
    },

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Usage and configuration problems map to exit status 1, everything else to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownId { .. } => 1,
            _ => 2,
        }
    }
}
