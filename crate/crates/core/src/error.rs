use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadErrorKind {
    Parse,
    DimensionMismatch,
    OutOfRange,
    NonFinite,
    Invariant,
}

impl std::fmt::Display for LoadErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LoadErrorKind::Parse => "parse error",
            LoadErrorKind::DimensionMismatch => "dimension mismatch",
            LoadErrorKind::OutOfRange => "value out of range",
            LoadErrorKind::NonFinite => "non-finite value",
            LoadErrorKind::Invariant => "invalid content",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("all label embeddings are pairwise identical in direction; cosine divergence is undefined")]
    DegenerateEmbedding,

    #[error("invalid path-length matrix: {0}")]
    InvalidPathMatrix(String),

    #[error("target class set has {0} classes; at least 2 are required for the covariance term")]
    DegenerateTargetSet(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{}: missing file", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: row {row}: {kind}: {message}", file.display())]
    Load {
        file: PathBuf,
        row: usize,
        kind: LoadErrorKind,
        message: String,
    },

    #[error("the first dual matrix produces a zero weak-learner matrix; nothing can be learned")]
    TrivialProblem,

    #[error("empty evaluation set")]
    EmptyEvaluationSet,

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(
        path: impl Into<PathBuf>,
        row: usize,
        kind: LoadErrorKind,
        message: impl Into<String>,
    ) -> Self {
        Error::Load {
            file: path.into(),
            row,
            kind,
            message: message.into(),
        }
    }
}
