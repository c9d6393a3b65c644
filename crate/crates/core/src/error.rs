use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by what went wrong rather than by module, so that the
/// CLI can map them onto exit codes without knowing which stage failed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix is rank deficient (smallest singular value {smallest:e})")]
    RankDeficient { smallest: f64 },

    #[error("degenerate edge ({i}, {j}): {reason}")]
    DegenerateEdge { i: usize, j: usize, reason: String },

    #[error("eigenvalue tie at rank cut {rank}: gap {gap:e}")]
    EigenvalueTie { rank: usize, gap: f64 },

    #[error("matrix is not orthogonal (defect {defect:e})")]
    NotOrthogonal { defect: f64 },

    #[error("non-finite entry in input")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid Clifford element: {0}")]
    InvalidClifford(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid simplicial complex: {0}")]
    InvalidComplex(String),

    #[error("simplex {0:?} is not in the complex")]
    MissingSimplex(Vec<usize>),

    #[error("filtration is not monotone: {0}")]
    NonMonotone(String),

    #[error("dissimilarity matrix invalid: {0}")]
    InvalidDissimilarity(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("map is not simplicial: {0}")]
    NotSimplicial(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("rounding ambiguity on triangle {simplex:?}: value {value}")]
    RoundingAmbiguity { simplex: Vec<usize>, value: f64 },

    #[error("closest element ambiguous: {0}")]
    SignAmbiguity(String),

    #[error("orientation obstruction: first Stiefel-Whitney class is nonzero")]
    Obstruction,

    #[error("linear system inconsistent: {0}")]
    Inconsistent(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
