use std::path::PathBuf;

use crate::genome::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid genome: {}", format_violations(.0))]
    InvalidGenome(Vec<Violation>),

    #[error("genome length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        message: String,
        line: usize,
        column: usize,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("training diverged at epoch {epoch} (last finite loss {last_finite_loss})")]
    Divergence { epoch: usize, last_finite_loss: f64 },

    #[error("cannot fit predictor: {0}")]
    Fit(String),

    #[error("point ({0}, {1}) exceeds the reference point")]
    OutsideReference(f64, f64),

    #[error("{0}")]
    Metric(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI's structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::InvalidGenome(_) => "invalid_genome",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::NonFinite(_) => "non_finite",
            Error::Shape { .. } => "shape",
            Error::Divergence { .. } => "divergence",
            Error::Fit(_) => "fit",
            Error::OutsideReference(..) => "outside_reference",
            Error::Metric(_) => "metric",
            Error::File { .. } | Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
