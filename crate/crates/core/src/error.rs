use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("states or operators live on different grids")]
    SpaceMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid has a node at the origin, which exponent n = {exponent} cannot tolerate")]
    OriginNode { exponent: f64 },

    #[error("matrix is not skew-symmetric: {0}")]
    NotSkew(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("generator is not position-diagonal")]
    NotPositionDiagonal,

    #[error("epsilon extrapolation did not converge: estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    NonConvergent { estimate: f64, tolerance: f64, per_epsilon_norms: Vec<f64> },

    #[error("quadrature window too small: kernel ratio {ratio:.3e} at the window edge exceeds {limit:.3e}")]
    QuadratureRange { ratio: f64, limit: f64 },

    #[error("problem too large for dense evaluation: {nodes} nodes exceeds limit {limit}")]
    TooLarge { nodes: usize, limit: usize },

    #[error("input state leaks outside its allowed support: tail mass {tail:.3e} exceeds {limit:.3e}")]
    TailMass { tail: f64, limit: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("all samples degenerate")]
    AllSamplesDegenerate,

    #[error("bound infeasible at b_cap = {b_cap}: sample {index} needs b = {required:.6e}")]
    Infeasible { index: usize, required: f64, b_cap: f64 },

    #[error("operator is not Hermitian on the samples: residual {0:.3e}")]
    NotHermitian(f64),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("derivative step underflow at |x| = {0:e}")]
    StepUnderflow(f64),

    #[error("state is contaminated at the lattice boundary: tail mass {0:.3e}")]
    BoundaryContaminated(f64),

    #[error("unknown report schema: {0}")]
    UnknownSchema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
