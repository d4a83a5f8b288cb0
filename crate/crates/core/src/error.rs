use thiserror::Error;

/// Errors raised by the solver, the simulator and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    /// Finite-time explosion of the Riccati coefficient `a_2^1`.
    #[error("Riccati blow-up: a2_1 explodes at t = {time} (denominator c + 2 c2_1 (T - t) reaches zero)")]
    RiccatiBlowUp { time: f64 },

    #[error("singular price volatility: 1 + a2_3 = {value:e} fell below the floor at t = {time}")]
    Singularity { time: f64, value: f64 },

    #[error("overflow: {what} exceeded the guard at t = {time}")]
    Overflow { what: String, time: f64 },

    #[error("time {t} outside the solved range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that come from the numerics rather than from the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RiccatiBlowUp { .. } | Error::Singularity { .. } | Error::Overflow { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
