use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is not connected (algebraic connectivity {lambda2:e})")]
    NotConnected { lambda2: f64 },

    #[error("argument {value} outside the open domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("parameters outside the stability region: {0}")]
    UnstableParameters(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("insufficient conditioning mass: {accepted} of {total} samples accepted (fraction {fraction:e})")]
    InsufficientConditioningMass {
        accepted: usize,
        total: usize,
        fraction: f64,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
