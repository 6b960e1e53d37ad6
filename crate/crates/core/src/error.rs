use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration step {dt:.3e} s exceeds the stability cap {cap:.3e} s (T_m/50)")]
    Stability { dt: f64, cap: f64 },

    #[error("duration {duration:.3e} s does not exceed the burn-in of {burn_in:.3e} s (5/gamma_m)")]
    TooShort { duration: f64, burn_in: f64 },

    #[error("invalid frequency grid: {0}")]
    Grid(String),

    #[error("uncoupled cavity (S_min = 1): no quadrature signal to convert")]
    Uncoupled,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error stems from user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}
