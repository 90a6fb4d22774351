use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("neutrality violated: |int (n_ext - n)| = {imbalance:e} exceeds {tolerance:e}")]
    Neutrality { imbalance: f64, tolerance: f64 },

    #[error("distribution value at node ({x_index}, {p_index}) is negative or not finite: {value:e}")]
    InvalidDistribution {
        x_index: usize,
        p_index: usize,
        value: f64,
    },

    #[error("relative entropy undefined: reference vanishes at node ({x_index}, {p_index}) where f > 0")]
    SingularReference { x_index: usize, p_index: usize },

    #[error("perturbation makes f negative; largest feasible amplitude is {max_eps:e}")]
    NegativePerturbation { max_eps: f64 },

    #[error("requested mass {mass:e} is not reachable on the momentum grid")]
    MassUnreachable { mass: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// `line` is 0 when the key is missing altogether.
    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("CFL condition violated: dt = {dt:e} > dx = {dx:e}")]
    Cfl { dt: f64, dx: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
