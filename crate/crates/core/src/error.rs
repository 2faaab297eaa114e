use std::path::PathBuf;

/// Errors raised anywhere in the simulator, learner, or harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unknown archetype `{0}`")]
    UnknownArchetype(String),

    #[error("invalid sensor configuration: {0}")]
    SensorConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("mixed sensor counts: expected {expected}, found {found}")]
    MixedSensorCount { expected: usize, found: usize },

    #[error("model has no populated bins")]
    NoPopulatedBins,

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("config error at line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
