use crate::design::Design;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("candidate set too large: {0}")]
    CandidateSetTooLarge(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid criterion: {0}")]
    InvalidCriterion(String),
    #[error("invalid error model: {0}")]
    InvalidErrorModel(String),
    #[error("singular information matrix: {0}")]
    SingularInformation(String),
    #[error("first-order solver stopped after {iterations} iterations with min sensitivity {violation:.3e}")]
    NonConvergence {
        iterations: usize,
        violation: f64,
        best: Box<Design>,
    },
    #[error("cannot round design: {0}")]
    InfeasibleRounding(String),
    #[error("moment computation failed: {0}")]
    MomentComputation(String),
    #[error("curvature computation failed: {0}")]
    Curvature(String),
    #[error("data shape: {0}")]
    DataShape(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulation aborted: {0}")]
    Simulation(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidDimension(_)
                | Error::CandidateSetTooLarge(_)
                | Error::InvalidModel(_)
                | Error::InvalidDesign(_)
                | Error::InvalidCriterion(_)
                | Error::InvalidErrorModel(_)
                | Error::InfeasibleRounding(_)
                | Error::DataShape(_)
                | Error::Config(_)
                | Error::Io { .. }
        )
    }
}
