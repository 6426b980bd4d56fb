//! Numerical certificates for the two-channel Bernoulli-Anderson model on
//! the line with energies above 2.
//!
//! The crate builds the one-cell symplectic transfer matrices, finds powers of
//! each generator close to the identity by simultaneous Diophantine
//! approximation, takes their principal logarithms and checks that those
//! generate all of sp(2, ℝ). Independently it estimates the Lyapunov spectrum
//! of the random product by Monte-Carlo QR iteration.
//!
//! Module map:
//!
//! * [`smallmat`]: 2×2 and 4×4 real kernels (eigen, QR, norms, symplectic test)
//! * [`model`]: potential matrices, transfer matrices, generator sets
//! * [`lyapunov`]: replica-based Lyapunov spectrum estimation
//! * [`diophantine`]: near-identity powers of transfer matrices
//! * [`liealg`]: sp(2) basis, logarithms, brackets and closure rank
//! * [`certify`]: per-energy certificates and energy sweeps

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod diophantine;
pub mod error;
pub mod liealg;
pub mod lyapunov;
pub mod model;
pub mod smallmat;

pub use certify::{
    certify_energy, certify_from_hits, certify_generators, cross_validate, sweep, CertifyConfig, CrossCheck,
    DensityCertificate, Implication, LyapunovCheckConfig, SuspectedInterval, SweepConfig, SweepReport,
};
pub use diophantine::{power_in_neighborhood, simultaneous_approx, DiophantineHit, NeighborhoodPower};
pub use error::{Error, Result};
pub use liealg::{bracket, explicit_certificate_path, lie_closure_rank, principal_log_power, LogWitness, Sp2Element};
pub use lyapunov::{
    estimate_ensemble, estimate_spectrum, separation_report, symmetry_defect, Ensemble, LyapunovEstimate,
    LyapunovParams, RngSeed, SeparationReport,
};
pub use model::{generator_set, potential_matrix, transfer_matrix, BernoulliConfig, GeneratorSet, TransferMatrix};
pub use smallmat::{is_symplectic, op_norm, qr_4x4, sym_eigen_2x2, Mat2, Mat4};

/// Version string embedded in every emitted artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
