use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("center index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("radial grid must be strictly increasing and positive (offending value {0})")]
    BadGrid(f64),

    #[error("operation requires a single translational term (n = {0})")]
    RequiresSingleTerm(usize),

    #[error("operation requires jstar = {expected}, got {got}")]
    WrongJstar { expected: &'static str, got: u32 },

    #[error("root at rho = {rho} is not hyperbolic (gamma = {gamma})")]
    NonHyperbolic { rho: f64, gamma: f64 },

    #[error("fixed-point solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("frame solution was computed for (beta, lambda1) = {solved:?}, called with {requested:?}")]
    ParameterMismatch { solved: (f64, f64), requested: (f64, f64) },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integration tolerance {0:e} outside [1e-12, 1e-4]")]
    BadTolerance(f64),

    #[error("trajectory spans {have} periods, need at least {need}")]
    InsufficientSpan { have: f64, need: f64 },

    #[error("need at least {need} post-transient section points, have {have}")]
    TooFewPoints { have: usize, need: usize },

    #[error("torus estimate is not converged")]
    NotConverged,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
