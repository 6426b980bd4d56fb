use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (|m01 - m10| = {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("energy {e} out of range: the closed-form transfer matrix needs E > 2")]
    EnergyOutOfRange { e: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("orthonormal frame collapsed at step {step} of replica {replica}")]
    DegenerateFrame { replica: u64, step: u64 },

    #[error("no simultaneous approximation with m <= {big_m}")]
    NoHitFound { big_m: u64 },

    #[error("power missed the identity neighborhood: dist {dist:e} >= delta {delta:e} at big_m {big_m}")]
    NeighborhoodMiss { dist: f64, delta: f64, big_m: u64 },

    #[error("power is outside the principal logarithm domain (||A^m - I|| = {dist:e})")]
    OutsideLogDomain { dist: f64 },

    #[error("exp(log) round trip error {err:e} exceeds {tol:e}")]
    RoundtripFailure { err: f64, tol: f64 },

    #[error("matrix is not in sp(2) (defect {defect:e})")]
    NotInAlgebra { defect: f64 },

    #[error("energy mismatch: certificate at {cert}, estimate at {estimate}")]
    EnergyMismatch { cert: f64, estimate: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
