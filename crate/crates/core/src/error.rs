use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("map is not univalent on |w| > 1: {0}")]
    NotUnivalent(String),

    #[error("|w| = {modulus} lies inside the unit disk")]
    OutsideDomain { modulus: f64 },

    #[error("corner point: psi' is zero or undefined at theta = {theta}")]
    CornerPoint { theta: f64 },

    #[error("insufficient N: estimated tail {tail:e} exceeds tolerance {tol:e}")]
    InsufficientTerms { tail: f64, tol: f64 },

    #[error("series coefficients do not decay (trailing ratio {ratio})")]
    NonDecayingTail { ratio: f64 },

    #[error("curve has no corners")]
    NoCorners,

    #[error("r_m schedule exhausted: {0}")]
    ScheduleExhausted(String),

    #[error("weight truncation failed: {0}")]
    TruncationBudget(String),

    #[error("degree n = {n} must exceed the weight length d_m = {d}")]
    DegreeTooLow { n: usize, d: usize },

    #[error("empty mesh")]
    EmptyMesh,

    #[error("argument grid too coarse near t = {t}")]
    GridTooCoarse { t: f64 },

    #[error("quadrature did not converge (last change {change:e})")]
    QuadratureNotConverged { change: f64 },

    #[error("degenerate least-squares system")]
    DegenerateSystem,

    #[error("non-finite function value at theta = {theta}")]
    NonFinite { theta: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
