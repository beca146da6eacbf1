use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site {site} out of range for a chain of length {len}")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("invalid site list {0:?}: sites must be distinct and ascending")]
    InvalidSites(Vec<usize>),

    #[error("operator is not Hermitian (max |A - A^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max |U^dagger U - I| = {0:e})")]
    NotUnitary(f64),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("eigenphase {phase} is within {tol:e} of the branch cut at +/-pi; reduce the time step")]
    BranchCut { phase: f64, tol: f64 },

    #[error("time {time} is not an integer multiple of the step {dt}")]
    NonCommensurateTime { time: f64, dt: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
