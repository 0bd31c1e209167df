use thiserror::Error;

use crate::resolvent::SmallnessReport;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("horizon too short: {0}")]
    Horizon(String),
    #[error("smallness condition violated: N = {value:.6e} (+{error:.1e}) is not below threshold {threshold:.6e}", value = .0.norm_2eps.value, error = .0.norm_2eps.error, threshold = .0.threshold)]
    Smallness(Box<SmallnessReport>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
