use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate level-set gradient |grad phi| = {norm:.3e}")]
    DegenerateGradient { norm: f64 },

    #[error("point at distance {distance:.3e} m is outside the band limit {limit:.3e} m")]
    OutOfBand { distance: f64, limit: f64 },

    #[error("degenerate projection: |denominator| = {denom:.3e} kg (opening field orthogonal to surface normal)")]
    DegenerateProjection { denom: f64 },

    #[error("state error: {0}")]
    State(String),

    #[error("assembly error in cell {cell}: {message}")]
    Assembly { cell: usize, message: String },

    #[error("step {step}, phase {phase}: {source}")]
    Step {
        step: usize,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// The error with any `Step` wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(self.root(), Error::NonConvergence { .. } | Error::SolverBreakdown(_))
    }

    pub fn is_config_error(&self) -> bool {
        matches!(self.root(), Error::Config(_) | Error::Parse { .. })
    }
}
