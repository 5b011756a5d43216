use std::path::PathBuf;

use crate::types::{Direction, Dof};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("zero signal: feature vector has no nonzero entry")]
    ZeroSignal,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient training data for {dof} {direction}: {reason}")]
    InsufficientTraining {
        dof: Dof,
        direction: Direction,
        reason: String,
    },

    #[error("degenerate prototype for {dof} {direction}: weighted superposition has norm {norm:e}")]
    DegeneratePrototype {
        dof: Dof,
        direction: Direction,
        norm: f64,
    },

    #[error("degenerate operators{}: overlap {overlap} is within {epsilon:e} of 1", dof_label(.dof))]
    DegenerateOperators {
        dof: Option<Dof>,
        overlap: f64,
        epsilon: f64,
    },

    #[error("undefined denominator: {0}")]
    UndefinedDenominator(String),

    #[error("malformed block {block}: {reason}")]
    MalformedBlock { block: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: schema error: {message}")]
    Schema {
        path: String,
        line: u64,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn dof_label(dof: &Option<Dof>) -> String {
    dof.map(|d| format!(" for {d}")).unwrap_or_default()
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit status for the CLI: 1 usage, 2 data, 3 numeric/model.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Context { source, .. } => source.exit_code(),
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::EmptyInput(_)
            | Error::InsufficientSamples { .. }
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::MalformedBlock { .. }
            | Error::InsufficientTraining { .. }
            | Error::Io { .. } => 2,
            Error::ZeroSignal
            | Error::DimensionMismatch { .. }
            | Error::DegeneratePrototype { .. }
            | Error::DegenerateOperators { .. }
            | Error::UndefinedDenominator(_)
            | Error::ModelFormat(_) => 3,
        }
    }
}
