use std::path::PathBuf;

/// Crate-wide error type. The CLI maps variants onto stable exit codes
/// (2 input, 3 segmentation, 4 training, 5 evaluation).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    ObjParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("label {0} has no faces")]
    EmptyLabel(u32),

    #[error("gmm fit failed: {0}")]
    Gmm(String),

    #[error("segmentation failed: {0}")]
    Segmentation(String),

    #[error("training aborted: {msg} (last checkpoint: {checkpoint:?})")]
    TrainingAborted {
        msg: String,
        checkpoint: Option<PathBuf>,
    },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code contract used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::ObjParse { .. } | Error::InvalidMesh(_) => 2,
            Error::EmptyLabel(_) | Error::Gmm(_) | Error::Segmentation(_) => 3,
            Error::TrainingAborted { .. } => 4,
            Error::Evaluation(_) => 5,
            Error::InvalidArgument(_) | Error::Json(_) => 2,
        }
    }
}
