use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {message}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: row {row}: empty sentence in column `{column}`")]
    EmptySentence {
        path: PathBuf,
        row: usize,
        column: String,
    },
    #[error("{path}: row {row}: answer must be 1 or 2, got `{value}`")]
    BadAnswer {
        path: PathBuf,
        row: usize,
        value: String,
    },
    #[error("{path}: header mismatch: expected `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("truncated file while reading {0}")]
    Truncated(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("non-finite component in vector for key `{0}`")]
    NonFinite(String),
    #[error("no embedding for key `{0}`")]
    MissingEmbedding(String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("cache does not belong to this model")]
    StaleCache,
    #[error("empty input sequence")]
    EmptySequence,
    #[error("negative sampling needs at least 2 stories, corpus has {0}")]
    CorpusTooSmall(usize),
    #[error("item `{0}` has no gold ending")]
    UnlabeledItem(String),
    #[error("checkpoint checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
