use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid particle system: {0}")]
    InvalidParticles(String),

    #[error("particles {0} and {1} coincide")]
    CoincidentParticles(usize, usize),

    #[error("unsupported dimension {0} (geometry handles d = 1 and d = 2)")]
    UnsupportedDimension(usize),

    #[error("invalid weight function: {0}")]
    InvalidWeight(String),

    #[error("unknown weight `{0}`")]
    UnknownWeight(String),

    #[error("linear system for the weight coefficients is {0}")]
    WeightSystem(&'static str),

    #[error("value of the field at the evaluation point is unknown (no analytic field and no coincident particle)")]
    MissingCenterValue,

    #[error("cell {0} has zero volume")]
    ZeroVolumeCell(usize),

    #[error("exact Voronoi deviation needs N <= {cap}, got N = {n}; use the greedy upper bound instead")]
    TooManyParticles { n: usize, cap: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
