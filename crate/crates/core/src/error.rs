use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis dimension {dim} exceeds hard cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("excitation sector N={0} is empty")]
    EmptySector(u32),

    #[error(
        "operator does not conserve excitation number: commutator norm {norm:e} (H norm {scale:e})"
    )]
    SectorMixing { norm: f64, scale: f64 },

    #[error("singular denominator: {0}")]
    Singular(String),

    #[error("ambiguous state identification: {0}")]
    Ambiguous(String),

    #[error("state identification failed: {0}")]
    NotFound(String),

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("positivity violated at t = {t:e}: minimum eigenvalue {min_eig:e}")]
    Positivity { t: f64, min_eig: f64 },

    #[error("trace drift at t = {t:e}: trace {trace}")]
    TraceDrift { t: f64, trace: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
