use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier { name: String, line: usize, column: usize },
    #[error("function `{name}` takes 1 argument but {got} were given ({line}:{column})")]
    WrongArity { name: String, got: usize, line: usize, column: usize },
    #[error("variable index out of range: x{index} with dimension {n}")]
    VariableOutOfRange { index: usize, n: usize },
    #[error("invalid metric spec: {0}")]
    InvalidSpec(String),
    #[error("metric is not positive definite at {point:?}")]
    NotSpd { point: Vec<f64> },
    #[error("point {point:?} lies outside the domain box")]
    Domain { point: Vec<f64> },
    #[error("non-finite value while evaluating {0}")]
    Eval(String),
    #[error("dimension {n} is too small (need n >= {min})")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("dimension {n} exceeds the configured cap {max}")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("unsupported dimension {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: String },
    #[error("jet order {have} is insufficient, need {need}")]
    InsufficientJetOrder { have: usize, need: usize },
    #[error("covariant derivative expects an all-covariant tensor")]
    VarianceMismatch,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("covector must be nonzero")]
    ZeroCovector,
    #[error("perturbation is not trace-free (g^ab h_ab = {trace:e})")]
    NonTraceFreePerturbation { trace: f64 },
    #[error("background is not unimodular (|g| = {det})")]
    NotUnimodular { det: f64 },
    #[error("Richardson extrapolation did not settle (spread {spread:e})")]
    ExtrapolationDiverged { spread: f64 },
    #[error("gradient vanishes (|du| = {norm:e})")]
    DegenerateGradient { norm: f64 },
    #[error("energy evaluation produced a non-finite value")]
    NonFiniteEnergy,
    #[error("line search failed at iteration {iteration}")]
    LineSearchFailed { iteration: usize },
    #[error("coordinate map is not a diffeomorphism (min Jacobian {min_jacobian:e})")]
    NotDiffeomorphic { min_jacobian: f64 },
    #[error("regularity r = {r} outside (0, 3]")]
    BadRegularity { r: f64 },
    #[error("partition covers |xi| <= {covered} but the lattice reaches {needed}")]
    PartitionCoverage { covered: f64, needed: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("no ellipticity band found on the lattice")]
    NoEllipticityBand,
    #[error("normal matrix is singular at xi = {xi:?} (min eigenvalue {min_eig:e})")]
    SingularNormalMatrix { xi: Vec<i64>, min_eig: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
