//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus loading, indexing, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A file-format violation, always carrying the 1-based line number.
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),

    #[error("duplicate query id `{0}`")]
    DuplicateQueryId(String),

    #[error("unknown document id `{0}`")]
    UnknownDoc(String),

    #[error("unknown query id `{0}`")]
    UnknownQuery(String),

    #[error("empty corpus: average document length is undefined")]
    EmptyCorpus,

    #[error("query `{0}` has no tokens")]
    EmptyQuery(String),

    #[error("document `{0}` has no tokens")]
    EmptyDocument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("runs share no queries")]
    DisjointRuns,
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
