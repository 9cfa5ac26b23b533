//! One inductive conjugation step around a fixed Diophantine rotation, and
//! the a posteriori check on the drift of the conjugated map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arithmetic::DiophantineVector;
use crate::cohomology::{self, CohomologyError};
use crate::rotation::displacement_hull;
use crate::spectral::{conjugate, reduce_mod_one, NormMethod, SpectralError, TorusMapLift};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("smallness violated: C·γ·N^a·ε₀ = {value:.3e} >= 1 (N = {n})")]
    SmallnessViolated { value: f64, n: usize },
    #[error("map has d = {map}, rotation has d = {alpha}")]
    DimensionMismatch { map: usize, alpha: usize },
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// `C` in `C·γ·N^{2τ+d+2}·ε₀ < 1`.
    pub smallness_constant: f64,
    /// Degree of `f_next`; `None` means `2N`.
    pub target_degree: Option<usize>,
    /// Orders `s` recorded in `eps_s_table` and `phi_norms`.
    pub orders: Vec<u32>,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            smallness_constant: 1.0,
            target_degree: None,
            orders: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub s: u32,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps0_before: f64,
    pub eps0_after: f64,
    pub eps_s_table: Vec<OrderRow>,
    /// Mean displacement of `f_next` minus `α`, reduced into `[-1/2, 1/2]^d`.
    pub drift: Vec<f64>,
    /// `C_post · ε′₀` from the last posteriori check; zero until one has run.
    pub drift_bound: f64,
    /// `γ N^{2τ+d+2} ε₀` without the constant `C`.
    pub smallness_margin: f64,
    /// `(s, ‖φ - Id‖_s)`.
    pub phi_norms: Vec<(u32, f64)>,
}

impl StepDiagnostics {
    pub fn eps_s(&self, s: u32) -> Option<OrderRow> {
        self.eps_s_table.iter().copied().find(|r| r.s == s)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub phi: TorusMapLift,
    pub f_next: TorusMapLift,
    pub diag: StepDiagnostics,
}

/// `2τ + d + 2`.
pub fn loss_exponent(alpha: &DiophantineVector) -> f64 {
    2.0 * alpha.tau() + alpha.dim() as f64 + 2.0
}

/// `‖F - R_α‖_{C^s}` (grid-sup), drift reduced mod `Z^d`.
pub fn eps(f: &TorusMapLift, alpha: &DiophantineVector, s: u32) -> f64 {
    f.distance_to_rotation(alpha.alpha(), s, NormMethod::GridSup)
}

/// Solves the linearized equation for every component of `f - R_α`, builds
/// `φ = Id + (φ_1, …, φ_d)` and returns `φ∘f∘φ⁻¹`.
pub fn step(
    f: &TorusMapLift,
    alpha: &DiophantineVector,
    n: usize,
    config: &StepConfig,
) -> Result<StepOutcome, StepError> {
    if f.dim() != alpha.dim() {
        return Err(StepError::DimensionMismatch {
            map: f.dim(),
            alpha: alpha.dim(),
        });
    }
    let eps0_before = eps(f, alpha, 0);
    let smallness_margin = alpha.gamma() * (n as f64).powf(loss_exponent(alpha)) * eps0_before;
    if config.smallness_constant * smallness_margin >= 1.0 {
        return Err(StepError::SmallnessViolated {
            value: config.smallness_constant * smallness_margin,
            n,
        });
    }
    let comps = f
        .displacement()
        .iter()
        .map(|u| cohomology::solve(u, alpha, n))
        .collect::<Result<Vec<_>, _>>()?;
    let phi = TorusMapLift::new(vec![0.0; f.dim()], comps)?;
    let target = config.target_degree.unwrap_or(2 * n);
    let f_next = conjugate(&phi, f, target)?;

    let eps0_after = eps(&f_next, alpha, 0);
    let eps_s_table = config
        .orders
        .iter()
        .map(|&s| OrderRow {
            s,
            before: if s == 0 {
                eps0_before
            } else {
                eps(f, alpha, s)
            },
            after: if s == 0 {
                eps0_after
            } else {
                eps(&f_next, alpha, s)
            },
        })
        .collect();
    let phi_norms = config
        .orders
        .iter()
        .map(|&s| (s, phi.displacement_norm(s, NormMethod::GridSup).value))
        .collect();
    let diag = StepDiagnostics {
        n,
        eps0_before,
        eps0_after,
        eps_s_table,
        drift: drift(&f_next, alpha),
        drift_bound: 0.0,
        smallness_margin,
        phi_norms,
    };
    Ok(StepOutcome { phi, f_next, diag })
}

/// Zero mode of `F - Id - α`, reduced to the representative nearest zero.
pub fn drift(f: &TorusMapLift, alpha: &DiophantineVector) -> Vec<f64> {
    let g = f.normalized();
    g.rho()
        .iter()
        .zip(alpha.alpha())
        .map(|(r, a)| reduce_mod_one(r - a))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosterioriReport {
    pub ok: bool,
    /// Sup norm of the drift vector.
    pub drift_norm: f64,
    /// `C_post · ε′₀ + floor`.
    pub bound: f64,
    /// `‖f_next - R_{α+drift}‖₀`.
    pub eps0_prime: f64,
    /// Whether `α` lies in the one-step displacement hull of `f_next`,
    /// inflated by its sampling tolerance and the floor.
    pub hull_contains_alpha: bool,
}

/// Checks `|drift| <= C_post · ‖f_next - R_{α+drift}‖₀ + floor` and
/// `α ∈ Conv{F(x) - x}`.
///
/// `floor` absorbs roundoff once `ε′₀` itself reaches working precision.
pub fn posteriori_check(
    f_next: &TorusMapLift,
    alpha: &DiophantineVector,
    c_post: f64,
    floor: f64,
) -> PosterioriReport {
    let d = drift(f_next, alpha);
    let drift_norm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps0_prime = f_next
        .normalized()
        .displacement_norm(0, NormMethod::GridSup)
        .value;
    let bound = c_post * eps0_prime + floor;
    let res = 4 * f_next.degree() + 1;
    let hull = displacement_hull(f_next, res);
    // Compare against the lift's own integer translate of α.
    let shifted: Vec<f64> = f_next
        .normalized()
        .rho()
        .iter()
        .zip(&d)
        .map(|(r, di)| r - di)
        .collect();
    let hull_contains_alpha = hull.contains(&shifted, hull.tolerance + floor);
    PosterioriReport {
        ok: drift_norm <= bound && hull_contains_alpha,
        drift_norm,
        bound,
        eps0_prime,
        hull_contains_alpha,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErrorModelError {
    #[error("need at least 3 recorded steps, got {0}")]
    InsufficientData(usize),
    #[error("order s = {0} missing from the recorded tables")]
    MissingOrder(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelFit {
    pub s: u32,
    pub s_prime: u32,
    /// Smallest constant making the estimate hold on every step.
    pub constant: f64,
    /// Required constant per step.
    pub per_step: Vec<f64>,
}

/// Right-hand side of the one-step estimate without its constant:
/// `N^{s+a}ε₀² + N^{τ+d/2}ε₀ε_s + N^{s-s'+d}(1 + N^{s+τ+d/2}ε₀)ε_{s'}`
/// with `a = 2τ + d + 2`.
#[allow(clippy::too_many_arguments)]
pub fn error_model_rhs(
    n: usize,
    tau: f64,
    d: usize,
    s: u32,
    s_prime: u32,
    eps0: f64,
    eps_s: f64,
    eps_sp: f64,
) -> f64 {
    let nf = n as f64;
    let (s, sp, d) = (s as f64, s_prime as f64, d as f64);
    let a = 2.0 * tau + d + 2.0;
    nf.powf(s + a) * eps0 * eps0
        + nf.powf(tau + d / 2.0) * eps0 * eps_s
        + nf.powf(s - sp + d) * (1.0 + nf.powf(s + tau + d / 2.0) * eps0) * eps_sp
}

/// Fits the single constant `C_{s,s'}` of the one-step estimate over a
/// sequence of recorded steps.
pub fn error_model_check(
    diags: &[StepDiagnostics],
    tau: f64,
    d: usize,
    s: u32,
    s_prime: u32,
) -> Result<ErrorModelFit, ErrorModelError> {
    if diags.len() < 3 {
        return Err(ErrorModelError::InsufficientData(diags.len()));
    }
    let mut per_step = Vec::with_capacity(diags.len());
    for diag in diags {
        let rs = diag.eps_s(s).ok_or(ErrorModelError::MissingOrder(s))?;
        let rsp = diag
            .eps_s(s_prime)
            .ok_or(ErrorModelError::MissingOrder(s_prime))?;
        let rhs = error_model_rhs(
            diag.n,
            tau,
            d,
            s,
            s_prime,
            diag.eps0_before,
            rs.before,
            rsp.before,
        );
        per_step.push(if rs.after == 0.0 { 0.0 } else { rs.after / rhs });
    }
    let constant = per_step.iter().copied().fold(0.0, f64::max);
    Ok(ErrorModelFit {
        s,
        s_prime,
        constant,
        per_step,
    })
}
