use thiserror::Error;

/// Errors raised by analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("denominator vanishes at s = {re} + {im}j (pole on evaluation grid)")]
    PoleOnGrid { re: f64, im: f64 },

    #[error("transfer function is improper: numerator degree {num} > denominator degree {den}")]
    Improper { num: usize, den: usize },

    #[error("transfer function denominator is identically zero")]
    ZeroDenominator,

    #[error("singular matrix encountered in {context} at omega = {omega} rad/s")]
    Singular { context: &'static str, omega: f64 },

    #[error("bilinear transform singular: pole at 2/Ts = {0} rad/s")]
    BilinearSingular(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient sampling: {fs} Hz is below the required {required} Hz")]
    InsufficientSampling { fs: f64, required: f64 },

    #[error("response has not settled: last two periods differ by {rel_change:.3e} (relative)")]
    NotSettled { rel_change: f64 },

    #[error("closed loop diverged at sample {sample} (|y| = {magnitude:e})")]
    Diverged { sample: usize, magnitude: f64 },

    #[error("disturbance calibration did not converge after {rounds} rounds")]
    CalibrationFailed { rounds: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
