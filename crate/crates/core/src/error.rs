use thiserror::Error;

/// Errors raised by model construction, simulation and file handling.
#[derive(Debug, Error)]
pub enum PvmError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("numeric fault in unit {unit_id}: {what}")]
    Numeric { unit_id: usize, what: &'static str },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PvmError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PvmError::Config(msg.into()))
}
