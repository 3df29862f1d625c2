use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {0} is below the minimum of 3")]
    DimensionTooSmall(usize),

    #[error("vector is not unit norm (|norm - 1| = {0:e})")]
    NotUnit(f64),

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("matrix is not orthogonal (max |M^T M - I| = {0:e})")]
    NotOrthogonal(f64),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("angle {0} rad is outside [0, pi/2)")]
    AngleOutOfRange(f64),

    #[error("rotation plane is undefined: vectors are parallel or antiparallel")]
    DegeneratePlane,

    #[error("invalid code parameters n={n}, alpha={alpha}")]
    InvalidCode { n: usize, alpha: usize },

    #[error("requested {requested} equations but the sources provide at most {available}")]
    TooManyEquations { requested: usize, available: usize },

    #[error("system is rank deficient: null space dimension {nullity} (rank {rank} of {cols} columns)")]
    RankDeficient { rank: usize, nullity: usize, cols: usize },

    #[error("need at least {required} sketches, got {actual}")]
    NotEnoughSketches { required: usize, actual: usize },

    #[error("sketches disagree on code parameters")]
    MixedParameters,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("table would hold {entries} entries, above the desk-scale limit of {limit}")]
    ScaleGuard { entries: u128, limit: u128 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("malformed record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
