//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A run configuration failed validation. The message names the field
    /// and the violated constraint.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its domain (too few particles,
    /// exponent outside the admissible interval, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator produced a non-finite state.
    #[error("integration blow-up at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    /// A series or iteration exceeded its convergence budget.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The classification quadratic has no real roots at these parameters.
    #[error("no real roots: {0}")]
    NoRealRoots(String),
}

pub type Result<T> = std::result::Result<T, Error>;
