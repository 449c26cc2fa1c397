use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid join configuration: {0}")]
    Config(String),

    #[error("invalid statistics: {0}")]
    InvalidStatistics(String),

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    /// Writers disagreed with the counting pass (internal bug guard).
    #[error("partition write mismatch in tile {tile}: writer {writer} was allotted {allotted} slots but produced {produced}")]
    PartitionMismatch {
        tile: usize,
        writer: usize,
        allotted: usize,
        produced: usize,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: record {record}: {message}")]
    Record {
        path: PathBuf,
        record: usize,
        message: String,
    },

    #[error("cannot normalize: {0}")]
    Normalization(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
