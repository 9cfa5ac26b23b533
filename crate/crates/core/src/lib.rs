//! Numerical KAM scheme for smooth perturbations of Diophantine rotations of
//! `T^1` and `T^2`.

// `!(x > 0.0)` is the NaN-rejecting form used for input checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod cohomology;
pub mod driver;
pub mod kam_step;
pub mod rotation;
pub mod scheduler;
pub mod spectral;

mod par;

pub use par::is_parallel;
