//! Diophantine vectors and small divisors.
//!
//! `α ∈ DC(γ, τ)` means `dist(k·α, Z) >= 1 / (γ |k|₁^τ)` for every nonzero
//! integer vector `k`. Only a finite ball `0 < |k|₁ <= K` can be checked, so
//! every verified vector carries the radius it was checked to.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::Freq;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArithmeticError {
    #[error("invalid Diophantine parameters: {0}")]
    InvalidParams(String),
    #[error("k = {k:?} makes k·α an integer to machine precision")]
    DegenerateVector { k: Vec<i64> },
    #[error("α violates DC(γ = {gamma}, τ = {tau}) at k = {k:?}")]
    ConditionViolated { gamma: f64, tau: f64, k: Vec<i64> },
}

/// `e^{2πi k·α} - 1`, evaluated through the reduced phase so that near-resonant
/// divisors keep full relative accuracy.
pub fn small_divisor(alpha: &[f64], k: Freq) -> Complex64 {
    let t = reduced_phase(alpha, k);
    let s = (PI * t).sin();
    Complex64::new(-2.0 * s * s, (2.0 * PI * t).sin())
}

/// `k·α - round(k·α)`.
fn reduced_phase(alpha: &[f64], k: Freq) -> f64 {
    let dot = alpha
        .iter()
        .zip(k.iter())
        .map(|(a, &ki)| a * ki as f64)
        .sum::<f64>();
    dot - dot.round()
}

/// `dist(k·α, Z)`.
pub fn dist_to_integers(alpha: &[f64], k: Freq) -> f64 {
    reduced_phase(alpha, k).abs()
}

/// One representative of each `±k` pair with `0 < |k|₁ <= radius`.
pub fn half_ball(dim: usize, radius: usize) -> impl Iterator<Item = Freq> {
    let r = radius as i64;
    (0..=r).flat_map(move |k0| {
        let rest = r - k0;
        let (lo, hi) = match (dim, k0) {
            (1, 0) => (1, 0),
            (1, _) => (0, 0),
            (_, 0) => (1, rest),
            _ => (-rest, rest),
        };
        (lo..=hi).map(move |k1| [k0, k1])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcReport {
    pub ok: bool,
    /// Frequency minimizing `dist(k·α, Z) · |k|₁^τ`.
    pub worst_k: Vec<i64>,
    /// That minimum.
    pub worst_ratio: f64,
}

fn check_inputs(alpha: &[f64], tau: f64, radius: usize) -> Result<(), ArithmeticError> {
    if !(alpha.len() == 1 || alpha.len() == 2) {
        return Err(ArithmeticError::InvalidParams(format!(
            "dimension {} not supported",
            alpha.len()
        )));
    }
    if radius < 1 {
        return Err(ArithmeticError::InvalidParams("K must be >= 1".into()));
    }
    if !(tau > 0.0) {
        return Err(ArithmeticError::InvalidParams(format!(
            "τ = {tau} must be positive"
        )));
    }
    Ok(())
}

fn worst_frequency(alpha: &[f64], tau: f64, radius: usize) -> (Freq, f64) {
    half_ball(alpha.len(), radius)
        .map(|k| {
            let w = dist_to_integers(alpha, k) * (crate::spectral::l1(k) as f64).powf(tau);
            (k, w)
        })
        .fold(([0, 0], f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        })
}

fn freq_vec(k: Freq, dim: usize) -> Vec<i64> {
    k[..dim].to_vec()
}

/// Checks `dist(k·α, Z) >= 1/(γ|k|₁^τ)` for `0 < |k|₁ <= radius`.
pub fn verify_dc(
    alpha: &[f64],
    gamma: f64,
    tau: f64,
    radius: usize,
) -> Result<DcReport, ArithmeticError> {
    check_inputs(alpha, tau, radius)?;
    if !(gamma > 0.0) {
        return Err(ArithmeticError::InvalidParams(format!(
            "γ = {gamma} must be positive"
        )));
    }
    let (k, w) = worst_frequency(alpha, tau, radius);
    Ok(DcReport {
        ok: gamma * w >= 1.0 - 4.0 * f64::EPSILON,
        worst_k: freq_vec(k, alpha.len()),
        worst_ratio: w,
    })
}

/// Smallest `γ` for which `verify_dc` passes at this radius.
pub fn best_gamma(alpha: &[f64], tau: f64, radius: usize) -> Result<f64, ArithmeticError> {
    check_inputs(alpha, tau, radius)?;
    for k in half_ball(alpha.len(), radius) {
        let dot: f64 = alpha.iter().zip(k.iter()).map(|(a, &b)| a * b as f64).sum();
        if dist_to_integers(alpha, k) <= 64.0 * f64::EPSILON * dot.abs().max(1.0) {
            return Err(ArithmeticError::DegenerateVector {
                k: freq_vec(k, alpha.len()),
            });
        }
    }
    let (_, w) = worst_frequency(alpha, tau, radius);
    Ok(1.0 / w)
}

/// A rotation vector together with Diophantine constants checked on the ball
/// `0 < |k|₁ <= verified_up_to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineVector {
    alpha: Vec<f64>,
    gamma: f64,
    tau: f64,
    verified_up_to: usize,
}

impl DiophantineVector {
    /// Verifies `alpha` (reduced into `[0, 1)`) against `DC(gamma, tau)`.
    pub fn verified(
        alpha: &[f64],
        gamma: f64,
        tau: f64,
        radius: usize,
    ) -> Result<Self, ArithmeticError> {
        let alpha: Vec<f64> = alpha.iter().map(|a| a.rem_euclid(1.0)).collect();
        if !(tau > alpha.len() as f64) {
            return Err(ArithmeticError::InvalidParams(format!(
                "τ = {tau} must exceed the dimension {}",
                alpha.len()
            )));
        }
        let report = verify_dc(&alpha, gamma, tau, radius)?;
        if !report.ok {
            return Err(ArithmeticError::ConditionViolated {
                gamma,
                tau,
                k: report.worst_k,
            });
        }
        Ok(DiophantineVector {
            alpha,
            gamma,
            tau,
            verified_up_to: radius,
        })
    }

    /// Verifies with the optimal `γ` for this radius.
    pub fn with_best_gamma(
        alpha: &[f64],
        tau: f64,
        radius: usize,
    ) -> Result<Self, ArithmeticError> {
        let reduced: Vec<f64> = alpha.iter().map(|a| a.rem_euclid(1.0)).collect();
        let gamma = best_gamma(&reduced, tau, radius)?;
        Self::verified(&reduced, gamma, tau, radius)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn verified_up_to(&self) -> usize {
        self.verified_up_to
    }
}

/// Golden mean `(√5 - 1)/2`.
pub fn golden_mean() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}
