use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("window side length must be positive, got {0}")]
    NonPositiveSide(f64),

    #[error("dimension {got} unsupported here (need {need})")]
    UnsupportedDimension { got: usize, need: &'static str },

    #[error("Voronoi nucleus intensity is zero; the tessellation is degenerate")]
    DegenerateTessellation,

    #[error("configuration already carries power marks")]
    AlreadyMarked,

    #[error("configuration has no power marks")]
    NotMarked,

    #[error("index {index} out of range for configuration of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("SINR needs two distinct points, got i = j = {0}")]
    SelfPair(usize),

    #[error("nonequidistance violated: {0}")]
    Nonequidistance(String),

    #[error("path-loss value {0} has no preimage")]
    NoPreimage(f64),

    #[error("region has zero volume")]
    ZeroVolume,

    #[error("region is not inside the buffered window")]
    OutsideWindow,

    #[error("signal-weighted order has an unresolved tie between points {0} and {1}")]
    UnresolvedTie(usize, usize),

    #[error("degree {degree} at vertex {vertex} exceeds the allowed maximum {allowed}")]
    DegreeExceeded { vertex: usize, degree: usize, allowed: usize },

    #[error("crossing probability does not straddle 0.5 on [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
