use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (bad preset, bad weights, bad domain, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an API contract (dimension mismatch, foreign tape node, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A loss, state or network output became NaN or infinite.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Adam received a non-finite gradient.
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    /// Fixed-step integration produced a non-finite state.
    #[error("integration blew up after t = {last_good_t}")]
    BlowUp { last_good_t: f64 },

    /// Adaptive integration could not take a step above the minimum size.
    #[error("step size underflow at t = {t} (h = {h:e}); problem may be stiff")]
    StepUnderflow { t: f64, h: f64 },

    /// The relative L2 error is undefined for a zero reference.
    #[error("relative L2 error undefined: reference has zero norm")]
    ZeroReference,
}

pub type Result<T> = std::result::Result<T, Error>;
