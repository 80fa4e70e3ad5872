use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported overlap factor K={0}; supported: 2, 3, 4")]
    UnsupportedOverlap(usize),

    #[error("prototype filter is not unit energy (energy = {0})")]
    FilterEnergy(f64),

    #[error("prototype filter is not symmetric (max deviation {0:e})")]
    FilterSymmetry(f64),

    #[error("interference constants violate gamma > delta > |epsilon| (gamma={gamma}, delta={delta}, epsilon={epsilon})")]
    ConstantOrdering { gamma: f64, delta: f64, epsilon: f64 },

    #[error("symbol instant q={q} outside the received signal (needs {needed} samples, have {have})")]
    OutOfRange { q: usize, needed: usize, have: usize },

    #[error("matrix is not circulant (max deviation {0:e})")]
    NotCirculant(f64),

    #[error("singular or ill-conditioned system (condition number {0:e})")]
    IllConditioned(f64),

    #[error("decomposition failed at stage '{stage}' (residual {residual:e})")]
    Decomposition { stage: &'static str, residual: f64 },

    #[error("zero pilot at subcarrier {0}")]
    ZeroPilot(usize),

    #[error("{lh} does not divide M={m}; nearest admissible L_h is {nearest}")]
    SparseSpacing { lh: usize, m: usize, nearest: usize },

    #[error("zero-energy preamble")]
    ZeroEnergy,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
