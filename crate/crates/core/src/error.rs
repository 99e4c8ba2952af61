use thiserror::Error;

use crate::gateway::GatewayError;
use crate::horn::{ParseError, SolveError};
use crate::stats::StatsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error in record {record}: {message}")]
    Schema { record: String, message: String },

    #[error("duplicate pair_id `{0}`")]
    DuplicatePair(String),

    #[error("unknown bias label `{0}`")]
    Vocabulary(String),

    #[error("pair `{pair_id}` violates invariants: {}", violations.join("; "))]
    InvalidPair { pair_id: String, violations: Vec<String> },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("coverage error, missing: {}", missing.join(", "))]
    Coverage { missing: Vec<String> },

    #[error("data error: {0}")]
    Data(String),

    #[error("rendering error: {0}")]
    Render(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Solve(#[from] SolveError),

    #[error(transparent)]
    Stats(#[from] StatsError),

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error("regex error: {0}")]
    Regex(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Short machine-readable kind, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::DuplicatePair(_) => "duplicate",
            Error::Vocabulary(_) => "vocabulary",
            Error::InvalidPair { .. } => "invalid_pair",
            Error::Contract(_) => "contract",
            Error::Extraction(_) => "extraction",
            Error::Coverage { .. } => "coverage",
            Error::Data(_) => "data",
            Error::Render(_) => "render",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Solve(_) => "solve",
            Error::Stats(_) => "stats",
            Error::Gateway(_) => "gateway",
            Error::Regex(_) => "regex",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
