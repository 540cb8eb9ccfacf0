use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("site {0:?} lies outside the simulation box")]
    OutsideBox(Vec<i64>),

    #[error("invalid horizon {0}: must be finite, positive and at most {max}", max = crate::MAX_HORIZON)]
    InvalidHorizon(f64),

    #[error("invalid time window: {0}")]
    InvalidWindow(String),

    #[error("cannot thin arrows from beta = {from} up to beta = {to}")]
    ThinningUpward { from: f64, to: f64 },

    #[error("lattice too large for the exact oracle: 3^{sites} states exceeds {cap}")]
    TooLarge { sites: usize, cap: usize },

    #[error("distribution is not stochastic: {0}")]
    NonStochastic(String),

    #[error("invalid block specification: {0}")]
    InvalidBlockSpec(String),

    #[error("replicate count must be positive")]
    NoReplicates,

    #[error("event must be increasing in the partial order: {0}")]
    NonMonotoneEvent(String),

    #[error("bisection bracket does not straddle the target: {0}")]
    Bracket(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("invalid initial law: {0}")]
    InvalidLaw(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("cannot merge reports: {0}")]
    Merge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
