//! Linearized conjugacy equation over a rigid rotation.
//!
//! For a component `g` of the perturbation, find a zero-mean `φ` with
//! `φ∘R_α - φ + Ṫ_N g = 0`. In coefficients, `φ̂(k) = -ĝ(k) / (e^{2πik·α} - 1)`
//! for `0 < |k|₁ <= N`, all other coefficients zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arithmetic::{small_divisor, DiophantineVector};
use crate::spectral::{field_norm, l1, Grid, NormMethod, PeriodicField, Transformer};

/// Divisors smaller than this are treated as resonances.
pub const DIVISOR_FLOOR: f64 = 1e-14;
/// Grid residual allowed after a solve, relative to `‖g‖₀`.
pub const RESIDUAL_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CohomologyError {
    #[error("dimension mismatch: field has d = {field}, rotation has d = {alpha}")]
    DimensionMismatch { field: usize, alpha: usize },
    #[error("truncation N = {n} exceeds the verified Diophantine radius {verified}")]
    UnverifiedTruncation { n: usize, verified: usize },
    #[error("|e^(2πik·α) - 1| = {magnitude:.3e} below floor at k = {k:?}")]
    DivisorTooSmall { k: Vec<i64>, magnitude: f64 },
    #[error("post-solve residual {residual:.3e} exceeds {bound:.3e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
}

/// Solves `φ∘R_α - φ + Ṫ_N g = 0` and checks the residual on a 4×-oversampled
/// grid.
pub fn solve(
    g: &PeriodicField,
    alpha: &DiophantineVector,
    n: usize,
) -> Result<PeriodicField, CohomologyError> {
    let phi = solve_coefficients(g, alpha, n)?;
    let residual = residual_sup(&phi, g, alpha.alpha(), n);
    let scale = field_norm(g, 0, NormMethod::GridSup).value;
    let bound = RESIDUAL_REL_TOL * scale;
    if residual > bound && residual > f64::MIN_POSITIVE {
        return Err(CohomologyError::ResidualTooLarge { residual, bound });
    }
    Ok(phi)
}

fn solve_coefficients(
    g: &PeriodicField,
    alpha: &DiophantineVector,
    n: usize,
) -> Result<PeriodicField, CohomologyError> {
    if g.dim() != alpha.dim() {
        return Err(CohomologyError::DimensionMismatch {
            field: g.dim(),
            alpha: alpha.dim(),
        });
    }
    if n > alpha.verified_up_to() {
        return Err(CohomologyError::UnverifiedTruncation {
            n,
            verified: alpha.verified_up_to(),
        });
    }
    let degree = n.min(g.degree());
    let mut phi = PeriodicField::zeros(g.dim(), degree);
    let ks: Vec<_> = phi.frequencies().collect();
    for k in ks {
        // One representative per ±k pair; set_pair fills the partner.
        if l1(k) == 0 || k[0] < 0 || (k[0] == 0 && k[1] < 0) {
            continue;
        }
        let c = g.coeff(k);
        if c.norm() == 0.0 {
            continue;
        }
        let div = small_divisor(alpha.alpha(), k);
        if div.norm() < DIVISOR_FLOOR {
            return Err(CohomologyError::DivisorTooSmall {
                k: k[..g.dim()].to_vec(),
                magnitude: div.norm(),
            });
        }
        phi.set_pair(k, -c / div).expect("k lies in the ball");
    }
    Ok(phi)
}

/// `sup |φ(x + α) - φ(x) + Ṫ_N g(x)|` on a 4×-oversampled grid.
pub fn residual_sup(phi: &PeriodicField, g: &PeriodicField, alpha: &[f64], n: usize) -> f64 {
    let head = g.truncate(n, crate::spectral::Truncation::Homogeneous);
    let deg = phi.degree().max(head.degree());
    let tr = Transformer::new(Grid::oversampled(g.dim(), deg));
    let shifted = tr.synthesize_real(&phi.translated(alpha));
    let plain = tr.synthesize_real(phi);
    let rhs = tr.synthesize_real(&head);
    shifted
        .iter()
        .zip(&plain)
        .zip(&rhs)
        .map(|((a, b), c)| (a - b + c).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRatio {
    pub s: u32,
    pub ratio: f64,
}

/// For each `s`, `‖φ‖_s / (γ N^{s+τ+d/2} ‖g‖₀)` with grid-sup norms.
pub fn norm_growth_report(
    g: &PeriodicField,
    alpha: &DiophantineVector,
    n: usize,
    orders: &[u32],
) -> Result<Vec<GrowthRatio>, CohomologyError> {
    let phi = solve(g, alpha, n)?;
    let g0 = field_norm(g, 0, NormMethod::GridSup).value;
    let d = g.dim() as f64;
    Ok(orders
        .iter()
        .map(|&s| {
            let phi_s = field_norm(&phi, s, NormMethod::GridSup).value;
            let scale = alpha.gamma() * (n as f64).powf(s as f64 + alpha.tau() + d / 2.0) * g0;
            let ratio = if phi_s == 0.0 { 0.0 } else { phi_s / scale };
            GrowthRatio { s, ratio }
        })
        .collect())
}
