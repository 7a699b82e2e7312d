use thiserror::Error;

/// Errors raised by validation and by the simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("ket is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian (deviation {0})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("matrix has negative eigenvalue {0}")]
    NegativeEigenvalue(f64),
    #[error("invalid spin system: {0}")]
    InvalidSystem(String),
    #[error("spin index {index} out of range for {n} spins")]
    SpinIndex { index: usize, n: usize },
    #[error("coupling between spins {0} and {1} is zero")]
    ZeroCoupling(usize, usize),
    #[error("unknown gate: {0}")]
    UnknownGate(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("not supported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Kraus operators are not trace preserving (deviation {0})")]
    NotTracePreserving(f64),
    #[error("state is not pseudo-pure: {0}")]
    NotPseudoPure(String),
    #[error("design matrix has rank {rank}, need {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("line at {freq} Hz exceeds the Nyquist limit {nyquist} Hz")]
    Nyquist { freq: f64, nyquist: f64 },
    #[error("state is not an eigenstate (superposition detected)")]
    Superposition,
    #[error("infidelity is not monotone over the error grid")]
    NonMonotone,
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
