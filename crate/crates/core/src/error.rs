use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("state space of {states} configurations exceeds the cap of {cap}")]
    Resource { states: u64, cap: u64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("unresolved: {0}")]
    Unresolved(String),

    #[error("d(t) still {last:.6} at t_max = {t_max}")]
    Unconverged {
        t_max: u64,
        last: f64,
        d_values: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
