use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(u32),
    #[error("sphere grids are only provided for n = 2 and 3, got n = {0}")]
    UnsupportedGridDimension(u32),
    #[error("cap radius must satisfy |r| < 1 - 1e-6, got {0}")]
    DegenerateCap(f64),
    #[error("point must lie strictly inside the unit ball, |x| = {0}")]
    NotInBall(f64),
    #[error("point cannot be normalized to the sphere, |x| = {0}")]
    NotOnSphere(f64),
    #[error("near-singular Moebius denominator ({0:.3e}); input violates |x| <= 1, |xi| < 1")]
    SingularMap(f64),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("renormalization did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(
        "renormalization point escaped toward the boundary (|xi| = {norm:.12}, relative residual {residual:.3e}); the measure is too concentrated"
    )]
    BoundaryEscape { norm: f64, residual: f64 },
    #[error("maximal direction is multiple at r = {r} (relative gap {gap:.3e})")]
    MultiplicityEncountered { r: f64, gap: f64 },
    #[error("lift sign anchor failed: top direction at r = {r} is not aligned with the first axis (|dot| = {dot:.3})")]
    AnchorFailed { r: f64, dot: f64 },
    #[error(
        "balance function has no sign change on the scan interval: G({r_min}) = {g_min:.6e}, G({r_max}) = {g_max:.6e}"
    )]
    NoSignChange {
        r_min: f64,
        g_min: f64,
        r_max: f64,
        g_max: f64,
    },
    #[error("degree integral did not round to an integer (raw {raw:.6}, gap {gap:.3})")]
    NonIntegerDegree { raw: f64, gap: f64 },
    #[error("mass matrix is not positive definite; quadrature too coarse for basis degree {basis_l}")]
    MassNotPositiveDefinite { basis_l: u32 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
