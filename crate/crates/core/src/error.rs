use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid wave vector {0:?}: the zero mode is excluded")]
    ZeroWaveVector([i32; 3]),

    #[error("cutoff must be at least 1, got {0}")]
    InvalidCutoff(i32),

    #[error("state has {got} coefficients but the basis has {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-degeneracy violated: sigma at basis index {index} is {sigma:e}")]
    Degenerate { index: usize, sigma: f64 },

    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory blew up at t = {time} (|u|_H = {norm:e})")]
    BlowUp { time: f64, norm: f64 },

    #[error("time {0} is not on the simulation grid")]
    OffGrid(f64),

    #[error("{outside} of {total} samples fall outside the density box")]
    BoxTooSmall { outside: usize, total: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("grid mismatch between density estimates")]
    GridMismatch,

    #[error("shift {0:?} is not aligned with the grid")]
    UnalignedShift(Vec<f64>),

    #[error("fit refused: only {0} usable (gap, distance) pairs")]
    FitRefused(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("{failed} of {total} trajectories hit the blow-up guard")]
    TooManyBlowUps { failed: usize, total: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
