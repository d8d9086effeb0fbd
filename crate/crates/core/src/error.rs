use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("hysteresis march did not reach a periodic state after {periods} periods (residual {residual:.3e})")]
    NonConvergentHysteresis { periods: usize, residual: f64 },

    #[error("solver failed to converge: {context} (residual {residual:.3e} after {iterations} iterations)")]
    NoConvergence {
        context: String,
        residual: f64,
        iterations: usize,
    },

    #[error("time integration diverged at t = {time:.6e} (state norm {norm:.3e})")]
    Diverged { time: f64, norm: f64 },

    #[error("query {value:.6e} outside supported range [{min:.6e}, {max:.6e}]; extrapolation refused")]
    ExtrapolationRefused { value: f64, min: f64, max: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
