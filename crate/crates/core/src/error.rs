use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("site {site} out of range for a layout with {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("Hilbert space dimension {dim} exceeds the limit of {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("matrix is not Hermitian (max |M - M†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver did not converge")]
    EigenNonConvergence,

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("rate for transition at {freq} is not finite")]
    NonFiniteRate { freq: f64 },

    #[error("steady state is not unique (second smallest singular value {second_singular_value:e})")]
    DegenerateSteadyState { second_singular_value: f64 },

    #[error("steady-state residual {residual:e} exceeds tolerance {tolerance:e}")]
    Convergence { residual: f64, tolerance: f64 },

    #[error("time step {dt:e} rejected: {reason}")]
    StepRejected { dt: f64, reason: String },

    #[error("solve failed at drive frequency {freq}: {source}")]
    AtDriveFrequency {
        freq: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no local maximum inside the fit window [{lo}, {hi}]")]
    NoPeak { lo: f64, hi: f64 },

    #[error("need at least {needed} usable rows, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("frequency grid rejected: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
