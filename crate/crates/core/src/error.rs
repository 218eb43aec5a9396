use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, StressError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StressError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: duplicate date {date}")]
    DuplicateDate { path: PathBuf, date: String },

    #[error("{path}: {filled} of {total} trading days forward-filled (limit 10%)")]
    TooSparse {
        path: PathBuf,
        filled: usize,
        total: usize,
    },

    #[error("degenerate window: {0}")]
    Degenerate(String),

    #[error("series too short: need {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample entropy undefined (phi_m = {phi_m}, phi_m1 = {phi_m1})")]
    UndefinedEntropy { phi_m: f64, phi_m1: f64 },

    #[error("determinism undefined: no recurrence points on diagonals long enough to host a line")]
    UndefinedDeterminism,

    #[error("empty date intersection: {0}")]
    EmptyIntersection(String),

    #[error("band [{lo}, {hi}] cycles/day contains no frequency bin for length {len}")]
    EmptyBand { lo: f64, hi: f64, len: usize },

    #[error("{band} band monthly series has zero variance")]
    DegenerateBand { band: &'static str },

    #[error("measure mismatch: expected {expected}, found {found}")]
    WrongMeasure {
        expected: &'static str,
        found: &'static str,
    },

    #[error("nothing to render")]
    EmptyPlot,

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
}
