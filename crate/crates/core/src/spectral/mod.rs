//! Truncated Fourier fields on `T^1`/`T^2` and near-identity torus maps.
//!
//! Fields are finite sums `Σ c_k e^{2πi k·x}` over an ℓ¹ frequency ball.
//! Maps are composed, inverted and conjugated by collocation on oversampled
//! grids followed by re-projection.

mod field;
mod grid;
mod map;
mod norm;

use thiserror::Error;

pub use field::{l1, Freq, PeriodicField, Truncation};
pub use grid::{smooth_at_least, Grid};
pub use map::{
    commutation_defect, compose, conjugate, identity_residual, invert_near_identity,
    invert_with_degree, reduce_mod_one, Composed, SpectralWarning, TorusMapLift,
    DEFAULT_INVERSION_TOL, MAX_INVERSION_SWEEPS,
};
pub use norm::{components_norm, field_norm, NormEstimate, NormMethod};

pub(crate) use grid::Transformer;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("only torus dimensions 1 and 2 are supported, got {0}")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("frequency {k:?} lies outside the ball of degree {degree}")]
    FrequencyOutOfRange { k: Vec<i64>, degree: usize },
    #[error("map is not a diffeomorphism: sup |Du| = {jacobian:.3e} >= 1")]
    NotDiffeomorphism { jacobian: f64 },
    #[error("inversion needs sup |Du| < 1/2, got {jacobian:.3e}")]
    NotContractive { jacobian: f64 },
    #[error("inversion stalled at residual {residual:.3e} after {sweeps} sweeps")]
    NoConvergence { residual: f64, sweeps: usize },
}
