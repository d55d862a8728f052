use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "collocation size {size} too small for max frequency {max_freq} (need at least {required})"
    )]
    Aliasing {
        size: usize,
        max_freq: i32,
        required: usize,
    },

    #[error("field has non-zero mean coefficient {mean:.3e} (tolerance {tol:.3e})")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("field cuts differ")]
    CutMismatch,

    #[error("Picard iteration did not converge at step {step} (t = {time:.6}); estimated contraction factor {contraction:.3}, reduce the time step")]
    PicardNonConvergence {
        step: usize,
        time: f64,
        contraction: f64,
    },

    #[error("time {t} outside [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("time grids are incompatible: {0}")]
    GridMismatch(String),

    #[error("eigensolve failed: {reason} (matrix condition estimate {condition:.3e})")]
    Eigen { reason: String, condition: f64 },

    #[error("information operator is ill-posed: condition number {condition:.3e}")]
    IllPosed { condition: f64 },

    #[error("singular linear solve (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix is not positive semidefinite: clipped mass {clipped:.3e} exceeds tolerance {tol:.3e}")]
    NotPsd { clipped: f64, tol: f64 },

    #[error("dataset carries no ground-truth initial condition")]
    MissingTruth,

    #[error("{needed} draws required, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
