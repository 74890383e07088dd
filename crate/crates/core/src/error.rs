use std::path::PathBuf;

/// Errors produced by grids, models, solvers, integrators and the benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("state is bound to grid revision {state}, but the grid is at revision {grid}")]
    StaleState { state: u64, grid: u64 },

    #[error("state has {got} values, expected {expected}")]
    StateShape { got: usize, expected: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("linear system is singular or numerically unusable: {0}")]
    Singular(String),

    #[error("iterative solver stopped after {iterations} iterations with residual {residual:e}")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("Newton iteration stopped after {iterations} iterations with residual {residual:e}")]
    NewtonNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value at t = {time}, cell {cell}, species {species}")]
    NonFinite { time: f64, cell: usize, species: usize },

    #[error("step size control gave up after {retries} retries (last error estimate {estimate:e}, tolerance {tolerance:e})")]
    StepRejected { retries: usize, estimate: f64, tolerance: f64 },

    #[error("steady-state search did not converge after {iterations} iterations (residual {residual:e})")]
    SteadyStateNotConverged { iterations: usize, residual: f64 },

    #[error("steady-state search converged to a non-positive root: component {component} = {value}")]
    NonPositiveSteadyState { component: usize, value: f64 },

    #[error("reference grid has {reference} cells, needs at least 10x the {coarse} test cells")]
    ReferenceTooCoarse { coarse: usize, reference: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
