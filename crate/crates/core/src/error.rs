use std::path::PathBuf;

use crate::data::Violation;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("bundle `{question_id}` is invalid: {}", join_violations(.violations))]
    InvalidBundle {
        question_id: String,
        violations: Vec<Violation>,
    },

    #[error("duplicate question_id `{0}`")]
    DuplicateQuestionId(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("embedding width mismatch: bundle `{question_id}` has d={found}, dataset has d={expected}")]
    EmbeddingWidth {
        question_id: String,
        expected: usize,
        found: usize,
    },

    #[error("sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },

    #[error("embedding row {0} has zero norm")]
    ZeroNormRow(usize),

    #[error("embedding row {row} is not unit-norm (norm {norm})")]
    NotNormalized { row: usize, norm: f64 },

    #[error("invalid PCA request: {0}")]
    Pca(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error("eigensolver did not converge after {sweeps} sweeps{}", context_suffix(.context))]
    NoConvergence {
        sweeps: usize,
        context: Option<String>,
    },

    #[error("{0}")]
    MissingField(String),

    #[error("method `{method}` cannot run: bundle `{question_id}` lacks {requirement}")]
    MissingPrerequisite {
        method: String,
        question_id: String,
        requirement: &'static str,
    },

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("score/label join failed; unmatched question_ids: {}", .0.join(", "))]
    UnmatchedIds(Vec<String>),

    #[error("invalid table: {0}")]
    Table(String),

    #[error("infeasible planted structure: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn context_suffix(c: &Option<String>) -> String {
    match c {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}
