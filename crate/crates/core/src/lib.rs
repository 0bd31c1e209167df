//! Numerical toolkit for Brownian motion with singular time-dependent drift:
//! forward-Kato norms, mollified drifts, the space-time resolvent Neumann
//! series and Euler–Maruyama diagnostics.

pub mod error;
pub mod field;
pub mod kato;
pub mod kernel;
pub mod mollify;
pub mod quad;
pub mod resolvent;
pub mod simulate;

pub use error::{Error, Result};
