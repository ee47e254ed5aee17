use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags or configuration; maps to exit code 2.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] sao_core::Error),

    #[error("{failed} of {replicas} replicas failed; first error: {first}")]
    TooManyFailures { failed: usize, replicas: usize, first: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("malformed report: {0}")]
    Format(String),

    #[error("could not start the worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    pub(crate) fn io(context: impl std::fmt::Display, source: std::io::Error) -> Self {
        Self::Io { context: context.to_string(), source }
    }

    pub(crate) fn json(context: impl std::fmt::Display, source: serde_json::Error) -> Self {
        Self::Json { context: context.to_string(), source }
    }

    pub(crate) fn csv(context: impl std::fmt::Display, source: csv::Error) -> Self {
        Self::Csv { context: context.to_string(), source }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
