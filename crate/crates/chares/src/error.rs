use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller handed in arguments that violate an operation's contract
    /// (wrong length, empty input, mismatched dimensions, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The synthesis filter cannot be inverted: its frequency response has a
    /// near-zero bin or its leading tap is near zero.
    #[error("singular synthesis filter: {0}")]
    SingularFilter(String),

    /// Internal sequencing contract broken (stale forward cache, off-schedule
    /// actor update, shape drift between nets and optimizer state).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Classifier training finished below the minimum usable accuracy,
    /// which points at a broken data pipeline rather than bad luck.
    #[error("classifier training failed: {0}")]
    TrainingFailure(String),

    /// A byte-level decode of a CHIQ/CHNN file failed.
    #[error("format error: {0}")]
    Format(String),

    /// Config file could not be parsed or is missing a required key.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline needs an artifact (classifier checkpoint, agent checkpoint)
    /// that is not there.
    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
