use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{n_atoms} atoms exceeds the supported maximum of {max}")]
    Capacity { n_atoms: usize, max: usize },

    #[error("van der Waals energy is singular at distance {distance} um")]
    Singular { distance: f64 },

    #[error("propagation failed accuracy audit: worst deviation {worst:e} at t = {time} us")]
    Accuracy { worst: f64, time: f64 },

    #[error("integration failed at t = {time} us: step size {step:e} too small (local error {local_error:e})")]
    Integration {
        time: f64,
        step: f64,
        local_error: f64,
    },

    #[error("{failed} of {total} configurations failed (limit is 0.1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown preset `{name}`; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
