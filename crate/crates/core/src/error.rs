use thiserror::Error;

use crate::data_model::{Attribute, Task};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One rejected input row, with its 1-based line number in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} truth entries vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty evaluation scope")]
    EmptyScope,

    #[error("attribute {attribute} is not assessable: {found} non-empty subgroup(s), need at least {needed}")]
    TooFewSubgroups {
        attribute: Attribute,
        found: usize,
        needed: usize,
    },

    #[error("no scorable action unit: {0}")]
    NoScorableAu(String),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("task mismatch: expected {expected}, found {found}")]
    TaskMismatch { expected: Task, found: Task },

    #[error("predictions missing for {} sample(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("unknown sample id `{0}`")]
    UnknownSample(String),

    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("fewer than 3 subjects ({0}); every set needs at least one subject")]
    TooFewSubjects(usize),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("{} row(s) rejected:\n{}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Rows(Vec<RowError>),

    #[error("empty leaderboard")]
    EmptyLeaderboard,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
