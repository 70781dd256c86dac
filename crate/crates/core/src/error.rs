use thiserror::Error;

/// Errors raised by the mixture model, the discrete operators and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixturaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finding did not converge after {iterations} iterations (h = {h}, rho = {rho})")]
    RootFinding { iterations: usize, h: f64, rho: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("smallness condition violated: max |k| = {max_k} exceeds delta = {delta}")]
    Smallness { max_k: f64, delta: f64 },

    #[error("Picard iteration did not converge at t = {time}: relative change {change:e} after {iterations} sweeps")]
    Picard {
        time: f64,
        iterations: usize,
        change: f64,
    },

    #[error("positivity lost at t = {time}: {field} = {value:e} at x = {x}")]
    Positivity {
        time: f64,
        x: f64,
        field: &'static str,
        value: f64,
    },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<MixturaError>,
    },

    #[error("eigensolver failure: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, MixturaError>;
