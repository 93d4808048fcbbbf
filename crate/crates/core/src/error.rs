use thiserror::Error;

pub type Result<T> = std::result::Result<T, IseaError>;

#[derive(Debug, Error)]
pub enum IseaError {
    /// Malformed or out-of-range configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A function argument violates its precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Zero-forcing needs at least as many receive antennas as sensors.
    #[error("orthogonal access infeasible: {antennas} antennas < {sensors} sensors")]
    Infeasible { antennas: usize, sensors: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl IseaError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        IseaError::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        IseaError::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        IseaError::Numerical(msg.into())
    }
}
