use thiserror::Error;

/// Errors produced by the graph, discretization and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("mesh too coarse: h_max = {h_max} but the shortest edge has length {shortest}")]
    MeshTooCoarse { h_max: f64, shortest: f64 },

    #[error("undefined scaling exponent at p = 6; use the critical parameterization by lambda")]
    UndefinedExponent,

    #[error("out of regime: {0}")]
    OutOfRegime(String),

    #[error("cannot project the zero function onto the mass sphere")]
    CannotProject,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("singular jacobian after {iterations} Newton steps")]
    SingularJacobian { iterations: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Option<Box<LastIterate>>,
    },

    #[error("step failure: energy kept increasing after {halvings} step halvings")]
    StepFailure { halvings: usize },

    #[error("continuation failed at rho = {rho}: {source}")]
    Continuation {
        rho: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Final iterate of a solver run that did not converge.
#[derive(Debug, Clone)]
pub struct LastIterate {
    pub values: Vec<f64>,
    pub lambda: f64,
}
