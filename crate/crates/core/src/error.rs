use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("geometry infeasible: no valid user position after {attempts} attempts")]
    GeometryInfeasible { attempts: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("multiplier bracket failure at RRH {rrh}: power still {power:e} W at mu = {mu:e}")]
    Bracket { rrh: usize, mu: f64, power: f64 },

    #[error("zero channel between RRH {rrh} and user {user}")]
    ZeroChannel { rrh: usize, user: usize },

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("realization {realization}, slot {slot}: {source}")]
    Context {
        realization: usize,
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn in_slot(self, realization: usize, slot: usize) -> Self {
        Error::Context {
            realization,
            slot,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
