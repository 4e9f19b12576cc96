use std::path::PathBuf;

/// Errors produced anywhere in the fitting, correction and evaluation paths.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("{} training feature(s) missing from new samples: {}", .0.len(), .0.join(", "))]
    MissingFeatures(Vec<String>),

    #[error("feature misalignment: {0}")]
    FeatureMisalignment(String),

    #[error("insufficient samples for residualization: n = {n}, p1 = {p1}")]
    InsufficientSamples { n: usize, p1: usize },

    #[error("collinear surrogates: combined design has rank {rank}, expected {expected}")]
    CollinearSurrogates { rank: usize, expected: usize },

    #[error("rank-deficient design: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("degenerate weighting: all weights are zero")]
    DegenerateWeighting,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("class {class:?} has {count} sample(s), at least {required} required")]
    ClassTooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
