use std::fmt;

use crate::data::FoldId;

/// A single problem found while reading or validating a results table.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    MissingColumn(String),
    NonNumeric { line: u64, text: String },
    NonFinite { line: u64 },
    OutOfBounds { line: u64, value: f64 },
    MalformedResample { line: u64, text: String },
    DuplicateCell { dataset: String, model: String, fold: FoldId },
    MissingCell { dataset: String, model: String, fold: FoldId },
    TooFew { what: &'static str, found: usize, min: usize },
    Csv(String),
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::MissingColumn(c) => write!(f, "missing column `{c}`"),
            Problem::NonNumeric { line, text } => {
                write!(f, "line {line}: value `{text}` is not numeric")
            }
            Problem::NonFinite { line } => write!(f, "line {line}: value is not finite"),
            Problem::OutOfBounds { line, value } => {
                write!(f, "line {line}: value {value} outside [0, 1] for a bounded metric")
            }
            Problem::MalformedResample { line, text } => {
                write!(f, "line {line}: resample `{text}` is not of the form Fold<i>.Rep<j>")
            }
            Problem::DuplicateCell { dataset, model, fold } => {
                write!(f, "duplicate cell (dataset `{dataset}`, model `{model}`, {fold})")
            }
            Problem::MissingCell { dataset, model, fold } => {
                write!(f, "missing cell (dataset `{dataset}`, model `{model}`, {fold})")
            }
            Problem::TooFew { what, found, min } => {
                write!(f, "need at least {min} {what}, found {found}")
            }
            Problem::Csv(msg) => write!(f, "csv: {msg}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid results table:\n{}", itemize(.0))]
    InvalidTable(Vec<Problem>),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("a model cannot be compared with itself (`{0}`)")]
    SameModel(String),

    #[error("tie for the best average score between {}", .0.join(", "))]
    NaiveTie(Vec<String>),

    #[error("the Friedman omnibus test retained H0 (p = {p_value:.4} >= alpha = {alpha}); the post-hoc family is undefined")]
    OmnibusRetained { p_value: f64, alpha: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite log-posterior at initialization of chain {chain}")]
    BadInitialization { chain: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn itemize(problems: &[Problem]) -> String {
    problems
        .iter()
        .map(|p| format!("  - {p}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
