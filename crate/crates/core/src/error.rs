use thiserror::Error;

/// Errors produced by the library. CLI exit codes are derived from
/// [`Error::is_configuration`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parity signature entries must be +1 or -1, got {0}")]
    InvalidParity(i32),

    #[error("diffusion matrix is not invariant under the parity involution")]
    ParityMismatch,

    #[error("mobility entry {index} is {found:e}, but the diffusion coefficient forces {expected:e}")]
    MobilityMismatch {
        index: usize,
        expected: f64,
        found: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("covariance lost positive definiteness at t = {time:e} (smallest eigenvalue {eigenvalue:e})")]
    CovarianceBreakdown { time: f64, eigenvalue: f64 },

    #[error("drift matrix is not Hurwitz (largest real part {0:e})")]
    NotHurwitz(f64),

    #[error("covariance is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("protocol is singular or undefined on [0, {horizon}]: {reason}")]
    SingularProtocol { horizon: f64, reason: String },

    #[error("t = {0} is outside the protocol domain")]
    Domain(f64),

    #[error("bound not applicable: {0}")]
    Applicability(String),

    #[error("transport masses do not match (difference {0:e})")]
    MassMismatch(f64),

    #[error("transport solver did not converge within {0} pivots")]
    SolverNonConvergence(usize),

    #[error("grid truncation discards mass {0:e}; increase the radius")]
    TruncationMass(f64),

    #[error("monte carlo configuration invalid: {0}")]
    InvalidMonteCarlo(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by user input rather than numerical failure.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidParity(_)
                | Error::ParityMismatch
                | Error::MobilityMismatch { .. }
                | Error::Dimension { .. }
                | Error::SingularProtocol { .. }
                | Error::Applicability(_)
                | Error::InvalidMonteCarlo(_)
                | Error::Config(_)
                | Error::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
