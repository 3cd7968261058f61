use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time {t} lies outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("theta = {0} is outside the admissible range (0, 1]")]
    InvalidTheta(f64),

    #[error("operands live on different finite element spaces")]
    SpaceMismatch,

    #[error("operands live on different time grids")]
    GridMismatch,

    #[error("embedding mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("embedding norm for p = {0} requires a user-supplied bound")]
    MissingEmbeddingBound(f64),

    #[error("Hoelder metadata is required for this check")]
    MissingHolder,

    #[error("regularization width {epsilon} is too large for jump spacing {min_gap}")]
    EpsilonTooLarge { epsilon: f64, min_gap: f64 },

    #[error("dual norm ascent did not converge in {iterations} iterations (last change {last_change:e})")]
    DualNormNonConvergence { iterations: usize, last_change: f64 },

    #[error("singular linear system (pivot {pivot:e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("slab {slab}: step size {tau} is not admissible (tau0 = {tau0})")]
    InadmissibleStep { slab: usize, tau: f64, tau0: f64 },

    #[error("slab {slab}: Newton and Picard iterations failed to converge (residual {residual:e})")]
    NonConvergence { slab: usize, residual: f64 },

    #[error("slab {slab}: {source}")]
    AtSlab { slab: usize, source: Box<Error> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
