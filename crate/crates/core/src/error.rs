//! Error type shared by every stage of the simulator.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A single problem found while reading or validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub origin: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(message: impl Into<String>) -> Self {
        Self { origin: None, line: None, message: message.into() }
    }

    pub fn at(origin: Option<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Self { origin, line: Some(line), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.origin, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{}: {}", p.display(), l, self.message),
            (None, Some(l)) => write!(f, "line {}: {}", l, self.message),
            (Some(p), None) => write!(f, "{}: {}", p.display(), self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Scenario text could not be parsed or violates a type invariant.
    #[error("invalid scenario:\n{}", join_diagnostics(.0))]
    Scenario(Vec<Diagnostic>),
    /// A single argument outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
    #[error("floating-point overflow: {0}")]
    Overflow(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time-stepper failure at step {step}: {message}")]
    Solver { step: usize, message: String },
    #[error("spectral leakage: {0}")]
    SpectralLeakage(String),
    #[error("convergence check failed: relative change {change:.3e} exceeds {tolerance:.1e}")]
    Convergence { change: f64, tolerance: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for problems caused by the input description rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Scenario(_) | Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
