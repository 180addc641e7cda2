use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: non-positive pivot at index {pivot}")]
    NotSpd { pivot: usize },

    #[error("binary32 Cholesky broke down at pivot {pivot}; the low-precision regime is violated")]
    NotSpdInLowPrecision { pivot: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    MaxIterations {
        iterations: usize,
        residual: f64,
        /// Best iterate seen so far, when the caller can make use of it.
        best: Option<Vec<f64>>,
    },

    #[error("conjugate gradients detected non-positive curvature at iteration {iteration}")]
    BreakdownNonSpd { iteration: usize },

    #[error("inner product is not positive definite")]
    InnerProductNotPositive,

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("vector is not tangent to the sphere at the base point")]
    NotTangent,

    #[error("logarithmic map undefined: points are antipodal or numerically identical directions")]
    AntipodalOrEqual,

    #[error("invalid mesh width {0}: 1/h must be an integer >= 2")]
    InvalidMeshWidth(f64),

    #[error("overlap width {delta} is not a multiple of the fine mesh width {h}")]
    MisalignedOverlap { delta: f64, h: f64 },

    #[error("subdomain {0} contains no fine nodes")]
    EmptySubdomain(usize),

    #[error("smallest eigenvalue is not simple at working accuracy (lambda1 = {lambda1}, lambda2 = {lambda2})")]
    DegenerateSmallestEigenvalue { lambda1: f64, lambda2: f64 },

    #[error("step size {eta:.6e} violates the cap pi/(2 |grad f|) = {cap:.6e}")]
    StepCapViolated { eta: f64, cap: f64 },

    #[error("iterate outside the basin: dist = {dist:.6e} >= phi = {phi:.6e}")]
    OutsideBasin { dist: f64, phi: f64 },

    #[error("constant c = {0} must satisfy 0 < c < 1/2")]
    InvalidC(f64),

    #[error("gradient vanished at a non-eigenvector")]
    ZeroGradientAtNonEigenvector,

    #[error("property ({property}) violated at sample {sample}: {detail}")]
    PropertyViolation {
        property: String,
        sample: usize,
        detail: String,
        counterexample: Vec<f64>,
    },

    #[error("recipe error: {0}")]
    Recipe(String),

    #[error("MatrixMarket error: {0}")]
    MatrixMarket(String),

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
