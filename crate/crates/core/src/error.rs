use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which part of the tool produced an error; drives CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Pipeline,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("no instances in dataset")]
    NoInstances,

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("row {row}: value {value:?} is not a declared value of nominal feature {feature:?}")]
    UnknownNominal { row: usize, feature: String, value: String },

    #[error("row {row}: value {value:?} in real feature {feature:?} is not numeric")]
    NotNumeric { row: usize, feature: String, value: String },

    #[error("row {row}: missing value in column {column:?}")]
    MissingValue { row: usize, column: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("class {class:?} has {count} instances, fewer than k = {k}")]
    ClassTooSmall { class: String, count: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("activation {0} outside [0, 1]")]
    ActivationOutOfRange(f64),

    #[error(
        "rule substitution for class {class:?} exceeded {limit} terms; \
         try a smaller network or more aggressive pruning"
    )]
    TermExplosion { class: String, limit: usize },

    #[error("cycle among neuron symbols at {0}")]
    SymbolCycle(String),

    #[error("unknown feature symbol {0:?}")]
    UnknownSymbol(String),

    #[error(
        "exact minimization limited to {max_atoms} atoms and {max_terms} terms, got {atoms} atoms and {terms} terms"
    )]
    ExactTooLarge {
        atoms: usize,
        terms: usize,
        max_atoms: usize,
        max_terms: usize,
    },

    #[error("{field} has {count} values but at least {min} are required")]
    TooFew {
        field: &'static str,
        count: usize,
        min: usize,
    },

    #[error("unsupported file format: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Format(_) => ErrorClass::Config,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::NoInstances
            | Error::RaggedRow { .. }
            | Error::UnknownNominal { .. }
            | Error::NotNumeric { .. }
            | Error::MissingValue { .. }
            | Error::Schema(_)
            | Error::InvalidDataset(_)
            | Error::ClassTooSmall { .. }
            | Error::Json(_) => ErrorClass::Data,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Pipeline,
        }
    }
}
