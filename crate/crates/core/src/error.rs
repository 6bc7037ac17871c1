use thiserror::Error;

/// Errors raised by the model, the transforms and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{what} = {value} is outside the domain of the function")]
    Domain { what: &'static str, value: f64 },

    #[error("root of S_w(p) not found after {iterations} iterations (p = {p}, residual = {residual:e})")]
    RootNotConverged { iterations: usize, p: f64, residual: f64 },

    #[error("secular equation: root {index} failed ({reason})")]
    Secular { index: usize, reason: String },

    #[error("singular matrix: zero pivot in column {column}")]
    Singular { column: usize },

    #[error("Newton iteration stalled after {iterations} iterations: residual {residual:e} at cell {cell}")]
    NewtonNotConverged { iterations: usize, residual: f64, cell: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
