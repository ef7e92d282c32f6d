use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure categories. The CLI maps these onto its exit codes, so the
/// grouping (input problems vs. numerical trouble) matters.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("not in the fast-pulse regime: {0}")]
    Regime(String),

    #[error("argument outside formula domain: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("front existence not established: {0}")]
    FrontNotFound(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("pulse solve failed: {0}")]
    Solve(String),

    #[error("ill-conditioned Jacobian: {0}")]
    Conditioning(String),

    #[error("resolution budget exceeded: {0}")]
    Resolution(String),

    #[error("simulation unstable: {0}")]
    Instability(String),

    #[error("no pulse formed: {0}")]
    NoPulse(String),

    #[error("domain too small: {0}")]
    DomainSize(String),
}

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_) | Error::Format(_) | Error::Hypothesis(_) | Error::Regime(_)
        )
    }
}
