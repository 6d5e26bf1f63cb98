use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("recording {participant_id}/task {task_id} has no {trait_kind} strokes")]
    MissingTrait {
        participant_id: String,
        task_id: u8,
        trait_kind: &'static str,
    },

    #[error("training error: {0}")]
    Training(String),

    #[error("schema mismatch: missing {missing:?}, extra {extra:?}")]
    Schema {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("{0} is not supported for this model kind")]
    Capability(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("execution failed: {0}")]
    Execution(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
