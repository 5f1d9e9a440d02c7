//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// A step index is outside `1..=N`.
    #[error("step index {index} out of range 1..={max}")]
    StepIndex { index: usize, max: usize },

    /// A time history has the wrong number of entries.
    #[error("history has {got} entries, expected {expected}")]
    HistoryLength { got: usize, expected: usize },

    /// Adaptive quadrature hit the panel budget before reaching tolerance.
    #[error("quadrature stalled at {panels} panels (error estimate {estimate:.3e}, target {target:.3e})")]
    QuadratureStalled {
        panels: usize,
        estimate: f64,
        target: f64,
    },

    /// The Caputo or Riemann-Liouville operator needs the derivative of its
    /// argument but none was supplied.
    #[error("scalar function has no derivative")]
    MissingDerivative,

    /// An iterative solve stopped before reaching the requested residual.
    #[error("solver stopped after {iterations} iterations with relative residual {residual:.3e} (target {target:.3e})")]
    SolverStalled {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    /// The tridiagonal elimination hit a vanishing pivot.
    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    /// The spectral reference solver only supports constant diagonal
    /// diffusion tensors.
    #[error("spectral oracle needs a constant diagonal diffusion tensor")]
    OracleUnavailable,

    /// Configuration parse or validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// I/O failure while writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
