use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("conic centre requested but S is singular")]
    SingularCenter,

    #[error("non-positive input: {0}")]
    NonPositiveInput(&'static str),

    #[error("measurements come from more than one anchor")]
    MixedAnchors,

    #[error("wrong measurement distribution: expected {expected}, found {found}")]
    WrongDistribution { expected: String, found: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("locus domain is empty")]
    EmptyDomain,

    #[error("pathological configuration: {0}")]
    PathologicalConfiguration(String),

    #[error("prefix is already Ind(1); no ambiguity to resolve")]
    NoAmbiguity,

    #[error("scenario has no measurements")]
    MissingMeasurements,

    #[error("no start converged to a solution")]
    NoSolutionFound,

    #[error("time {t} s is outside the control horizon [0, {horizon}] s")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("measurement {index} coincides with its anchor (zero range)")]
    ZeroRange { index: usize },

    #[error("controls do not reproduce the trajectory points (max deviation {max_dev:e} m)")]
    InconsistentControls { max_dev: f64 },

    #[error("prefix contributions are parallel; the critical line is undefined")]
    DegeneratePrefix,

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}
