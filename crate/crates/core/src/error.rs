use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radius {0} outside [0, 1]")]
    InvalidRadius(f64),

    #[error("polar angle {0} outside [0, pi]")]
    InvalidTheta(f64),

    #[error("azimuthal angle {0} outside [0, 2pi)")]
    InvalidPhi(f64),

    #[error("zero-length vector has no direction")]
    ZeroDirection,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("prior exponent alpha must be finite and >= 0 (got {0})")]
    InvalidAlpha(f64),

    #[error("grid resolution {0}x{1}x{2}: every axis needs at least 2 cells")]
    InvalidResolution(usize, usize, usize),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("degenerate Bayes update: normalization {0:e} below threshold")]
    DegenerateUpdate(f64),

    #[error("posterior grid does not match the geometry the gain table was built for")]
    GeometryMismatch,

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("aggregates are not comparable: {0}")]
    Mismatch(String),

    #[error("baseline has no entries for alpha = {0}")]
    AlphaMismatch(f64),

    #[error("baseline covers none of the requested N values")]
    MissingBaseline,

    #[error("invalid baseline table: {0}")]
    InvalidBaseline(String),
}

pub type Result<T> = std::result::Result<T, Error>;
