use alloc::string::String;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{name} must be {requirement}, got {value}")]
    Domain {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("timescale separation violated: {which} = {value:.3e} exceeds {limit}")]
    TimescaleSeparation {
        which: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("integration step {step:.3e} s violates `{bound}` (limit {limit:.3e} s)")]
    StepTooLarge {
        step: f64,
        bound: &'static str,
        limit: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown block name `{name}` at byte {position}")]
    UnknownBlock { name: String, position: usize },

    #[error(
        "non-positive magnetization {value:.3e} at t = {t:.6e} s after asymptote handling; \
         try a different asymptote mode"
    )]
    NonPositiveLog { t: f64, value: f64 },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error(
        "coarse-graining window is empty: tau_c/dt = {tau_ratio:.3e} (need < {tau_limit}), \
         omega1*dt = {drive_ratio:.3e} (need < {drive_limit})"
    )]
    EmptyWindow {
        tau_ratio: f64,
        tau_limit: f64,
        drive_ratio: f64,
        drive_limit: f64,
    },

    #[error("quadrature grid too coarse: {0}")]
    Resolution(String),

    #[error("adaptive quadrature did not reach tolerance: estimated error {error:.3e} on {value:.3e}")]
    QuadratureTolerance { value: f64, error: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            requirement: "> 0",
            value,
        })
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            requirement: "finite",
            value,
        })
    }
}
