use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation point {re}{im:+}i lies within 1e-12 of an atom")]
    PoleProximity { re: f64, im: f64 },

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("spectrum must be strictly decreasing (violated at index {index})")]
    NotDecreasing { index: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("measure is a point mass; the saddle equation needs at least two atoms")]
    PointMass,

    #[error("{count} distinct roots in the upper half-plane at c = {c}")]
    MultipleUpperRoots { count: usize, c: f64 },

    #[error("c = {c} lies outside A_alpha")]
    OutsideAalpha { c: f64 },

    #[error("quadrature did not converge: estimate {estimate}, successive refinements differ by {discrepancy:e}")]
    QuadratureNonConvergence { estimate: f64, discrepancy: f64 },

    #[error("u = {u} coincides with the atom {atom}")]
    AtomCollision { u: f64, atom: f64 },

    #[error("level {level} outside 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("exact evaluation limited to n <= {max}, got n = {n}")]
    SizeGuard { n: usize, max: usize },

    #[error("no circle separates the enclosed poles (blocking gap {gap:e})")]
    ContourSeparationFailure { gap: f64 },

    #[error("contour quadrature did not settle within {nodes} nodes")]
    NonConvergence { nodes: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NonHermitian { asymmetry: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("boxes {first} and {second} overlap")]
    OverlappingBoxes { first: usize, second: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
