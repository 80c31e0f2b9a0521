//! Crate error type.

use crate::C64;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model validation failed: {0}")]
    InvalidModel(String),

    #[error("first-sheet evaluation requires Im z > 0 (got z = {z}); use the second-sheet operation for Im z <= 0")]
    FirstSheetDomain { z: C64 },

    #[error("z = {z} lies within {dist:.3e} of the branch point at lambda = {branch_point}")]
    BranchPoint { z: C64, branch_point: f64, dist: f64 },

    #[error("analytic continuation unsupported: {0}")]
    UnsupportedContinuation(String),

    #[error("kernel is a delta distribution (unbounded flat channel): alpha(t) has no pointwise value; use the Markovian generator")]
    DeltaKernel,

    #[error("quadrature did not converge: achieved error estimate {achieved:.3e} exceeds requested {requested:.3e}")]
    QuadratureTolerance { achieved: f64, requested: f64 },

    #[error("eigenvalue branches {a} and {b} collide: relative gap {gap:.3e} below degeneracy tolerance {tol:.3e}")]
    Degeneracy { a: usize, b: usize, gap: f64, tol: f64 },

    #[error("pole at z = {z} is near-defective: |1 - omega_branch'(z)| = {denom:.3e} below tolerance")]
    NearDefectivePole { z: C64, denom: f64 },

    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("decay-rate fit rejected: {reason}{}", .revival_time.map(|t| format!(" (revival at t = {t})")).unwrap_or_default())]
    FitRejected {
        reason: String,
        revival_time: Option<f64>,
    },

    #[error("non-finite value detected at step {last_good_index} (t = {last_good_t}); aborting")]
    NonFinite { last_good_index: usize, last_good_t: f64 },
}
