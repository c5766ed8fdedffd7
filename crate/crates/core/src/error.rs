use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bands are degenerate at k = ({kx}, {ky}); no eigenvector gauge exists there")]
    DegeneratePoint { kx: f64, ky: f64 },

    #[error("phase of f(k) is undefined at k = ({kx}, {ky}) (|f| = {abs_f:e})")]
    UndefinedPhase { kx: f64, ky: f64, abs_f: f64 },

    #[error("grid node {index} at k = ({kx}, {ky}) is degenerate")]
    DegenerateNode { index: usize, kx: f64, ky: f64 },

    #[error("grid does not span a reciprocal primitive cell: {0}")]
    NotACell(String),

    #[error("plaquette sum {0} is not within tolerance of an integer multiple of 2π")]
    NonIntegerChern(f64),

    #[error("operation requires an unstrained model (strain = 1), got {0}")]
    RequiresUnstrained(f64),

    #[error("halving the time step moved the final position by {change:e} (limit {limit:e})")]
    StepTooLarge { change: f64, limit: f64 },

    #[error("propagation path crosses a degenerate point near k = ({kx}, {ky})")]
    DegenerateOnPath { kx: f64, ky: f64 },

    #[error("packet centre is {distance} from the lattice edge, needs at least {required}")]
    TooCloseToBoundary { distance: f64, required: f64 },

    #[error("packet came within {distance} of the lattice edge at t = {t} (needs {required})")]
    BoundaryContact { t: f64, distance: f64, required: f64 },

    #[error("norm drifted by {drift:e} during propagation (limit {limit:e})")]
    NormDrift { drift: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solve failed: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
