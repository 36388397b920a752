use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("root solver did not converge after {iterations} iterations on [{lo}, {hi}] (last t = {t}, residual = {residual})")]
    RootNotConverged {
        iterations: usize,
        lo: f64,
        hi: f64,
        t: f64,
        residual: f64,
    },

    #[error("bracket violation on [{lo}, {hi}]: R(lo) = {r_lo}, R(hi) = {r_hi}")]
    BracketViolation {
        lo: f64,
        hi: f64,
        r_lo: f64,
        r_hi: f64,
    },

    #[error("primal-dual iteration diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("negative density {value} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("step {step} (t = {time}) failed: {source}")]
    StepFailed {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
