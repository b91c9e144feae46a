use thiserror::Error;

/// Failures raised by the solvers. Numeric payloads are reported as `f64`
/// regardless of the working precision.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// `g` was evaluated at or beyond the saturation speed.
    #[error("flux argument {y} outside the open interval (-{c}, {c})")]
    Domain { y: f64, c: f64 },

    #[error("equilibrium ({w}, {v}) has a zero eigenvalue")]
    Degenerate { w: f64, v: f64 },

    #[error("step size underflow at s = {s} (h = {h})")]
    StepSizeUnderflow { s: f64, h: f64 },

    #[error("graph denominator vanished at v = {v}, W = {w}")]
    DenominatorVanished { v: f64, w: f64 },

    #[error("v' changes sign near v = {v}")]
    SignChange { v: f64 },

    #[error("trajectory from ({w0}, {v0}) is inconclusive after the maximal span")]
    Inconclusive { w0: f64, v0: f64 },

    #[error("manifold seed left the admissible region for both eigenvector orientations")]
    SeedEscaped,

    #[error("no dichotomy: both ends of [{lo}, {hi}] classify identically")]
    NoDichotomy { lo: f64, hi: f64 },

    #[error("sigma = sigma_star ({sigma_star}): threshold is not unique")]
    DegenerateThreshold { sigma_star: f64 },

    #[error("anchor mismatch: u0/S0 = {ratio} but w(s0) = {w}")]
    AnchorMismatch { ratio: f64, w: f64 },

    #[error("only {found} samples in the fitting window, need {needed}")]
    InsufficientResolution { found: usize, needed: usize },

    #[error("regime violation: {0}")]
    RegimeViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
