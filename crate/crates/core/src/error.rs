use thiserror::Error;

/// Errors raised by mechanism construction, estimation and the risk/bound calculus.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("subset size d={d} out of range: require 1 <= d <= k-1 (k={k})")]
    DOutOfRange { k: usize, d: usize },

    #[error("output alphabet too large for explicit matrix: {what} (k={k}, max {max})")]
    AlphabetTooLarge {
        what: &'static str,
        k: usize,
        max: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("malformed mechanism: {0}")]
    MalformedMechanism(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empirical estimator undefined at epsilon = 0")]
    EpsilonZero,

    #[error("channel matrix is rank deficient (rank < k)")]
    RankDeficient,

    #[error("equivalence class {0} has zero mass")]
    ZeroClassMass(usize),

    #[error("matrix is singular or too ill-conditioned to invert")]
    SingularPhi,

    #[error("matrix is not positive definite")]
    NotPD,

    #[error("mechanism is not extremal for epsilon={0}")]
    NotExtremal(f64),

    #[error(
        "KL divergence infinite: second argument vanishes where the first has mass (index {0})"
    )]
    SupportMismatch(usize),

    #[error("perturbed distribution leaves the simplex; n={0} is too small")]
    SimplexViolation(u64),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("grid resolution {got} below the minimum of {min} nodes per axis")]
    ResolutionTooCoarse { got: usize, min: usize },

    #[error("unsupported alphabet size k={0}; grid posteriors require k in {{2,3}}")]
    UnsupportedK(usize),

    #[error("estimator not applicable: {0}")]
    EstimatorMismatch(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// True for errors that indicate a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient
                | Error::SingularPhi
                | Error::NotPD
                | Error::ZeroClassMass(_)
                | Error::SimplexViolation(_)
                | Error::DomainViolation(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
