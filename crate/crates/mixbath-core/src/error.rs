use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at line {line}, column {col}: {msg}")]
    Config {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error("units error: {0}")]
    Units(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate roots: separation {separation:e} below threshold {threshold:e}")]
    DegenerateRoots { separation: f64, threshold: f64 },

    #[error("root iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("frequency node w = {w} collides with a root")]
    NodeCollision { w: f64 },

    #[error("unstable roots: max Re s = {max_re:e}")]
    UnstableRoots { max_re: f64 },

    #[error("quadrature did not converge after {subdivisions} subdivisions (error {error:e}, target {target:e})")]
    QuadratureNonConvergence {
        subdivisions: usize,
        error: f64,
        target: f64,
    },

    #[error("denominator {value:e} below floor at t = {t}")]
    DenominatorFloor { t: f64, value: f64 },

    #[error("grid too coarse: step-halving deviation {deviation:e} exceeds {tolerance:e}")]
    GridTooCoarse { deviation: f64, tolerance: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("window too short: {0}")]
    WindowTooShort(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code category: 1 for input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Invalid(_)
            | Error::Units(_)
            | Error::Precondition(_)
            | Error::Io(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn config(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            col,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
