use thiserror::Error;

/// Errors produced by the recovery pipeline and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator coefficient list is empty")]
    EmptyCoefficients,

    /// `l` is the 1-based index of the first coefficient α_{2l} with the wrong sign (or zero).
    #[error("coefficient alpha_{} violates the sign pattern (index l = {0})", 2 * .0)]
    SignPatternViolation(usize),

    #[error("tolerance {tol_log2:.1} (log2) not reachable below the precision ceiling of {ceiling} bits")]
    TolUnachievable { tol_log2: f64, ceiling: u32 },

    #[error("sampling point is resonant: sin(k x0) vanishes at k = {0}")]
    ResonantPoint(u64),

    #[error("ratio rho = {rho} is not above the threshold {threshold}")]
    RhoBelowThreshold { rho: f64, threshold: f64 },

    #[error("accumulated diffusivity did not reach {target} before t = {horizon}")]
    RootBracketFailure { target: f64, horizon: f64 },

    #[error("working precision {have} bits is below the required {need} bits")]
    PrecisionInsufficient { have: u32, need: u32 },

    #[error("oracle system is ill-conditioned at elimination step {step}; raise precision")]
    IllConditioned { step: usize },

    #[error("invalid diffusivity profile: {0}")]
    InvalidProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
