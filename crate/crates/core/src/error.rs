use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or adaptive procedure did not meet its tolerance.
    #[error(
        "no convergence in {what}: estimate {estimate:e}, error {error:e} after {iterations} steps"
    )]
    NonConvergence {
        what: &'static str,
        estimate: f64,
        error: f64,
        iterations: usize,
    },

    /// The truncated power series failed its ratio test.
    #[error("series diverges at s = {s:e}: term {term} ratio {ratio:.3} (n_max = {n_max})")]
    SeriesDivergence {
        s: f64,
        term: usize,
        ratio: f64,
        n_max: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
