use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("Perron vector not unique/positive: graph is not strongly connected")]
    Reducible,

    #[error("{0} requires a symmetric Laplacian")]
    NotSymmetric(&'static str),

    #[error(
        "state component {index} = {value} maps outside the domain of potential `{potential}`"
    )]
    Domain {
        index: usize,
        value: f64,
        potential: String,
    },

    #[error("argument {value} is outside the domain of `{function}`")]
    ScalarDomain { function: String, value: f64 },

    #[error("{what} is not a probability vector (sum = {sum}, min = {min})")]
    NotNormalized {
        what: &'static str,
        sum: f64,
        min: f64,
    },

    #[error("`{function}` is not strictly increasing near {at}")]
    NotStrictlyIncreasing { function: String, at: f64 },

    #[error("potential `{potential}` is not strictly convex: H''({at}) = {value}")]
    NotConvex {
        potential: String,
        at: f64,
        value: f64,
    },

    #[error("time step {dt} exceeds the stability bound; use dt <= {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("step size fell below {dt_min} at t = {t} while keeping the state positive")]
    StepUnderflow { t: f64, dt_min: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("trajectory has {len} samples, at least {required} required")]
    TrajectoryTooShort { len: usize, required: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by a state or argument lying outside a
    /// function's domain.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::ScalarDomain { .. } | Error::StepUnderflow { .. }
        )
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
