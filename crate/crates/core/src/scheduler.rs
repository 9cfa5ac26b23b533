//! Parameter arithmetic of the convergence proof: feasibility of
//! `(σ, λ, μ, ν)`, the derived exponents `γ₀ = λa`, `s₀ = μa`, `b = νa` with
//! `a = 2τ + d + 2`, the truncation schedule `N_n = N₁^{(1+σ)^{n-1}}` and the
//! error envelopes it must respect.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on scheduled truncation orders.
pub const DEFAULT_N_CAP: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error("μ-window is empty: lo = {lo} >= hi = {hi}")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    #[error("N_{n} = {value:.3e} exceeds the cap {cap}")]
    Overflow { n: usize, value: f64, cap: usize },
    #[error("invalid schedule input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub ok: bool,
    pub violated: Vec<String>,
}

/// Checks `σ < 1`, `λ + ν > 2`, `(1-σ)λ > 1`, `σν > 1/2`, with all three
/// parameters positive.
pub fn validate(sigma: f64, lambda: f64, nu: f64) -> Validation {
    let mut violated = Vec::new();
    if !(sigma > 0.0 && lambda > 0.0 && nu > 0.0) {
        violated.push("σ, λ, ν > 0".to_string());
    }
    let checks = [
        (sigma < 1.0, "σ < 1"),
        (lambda + nu > 2.0, "λ + ν > 2"),
        ((1.0 - sigma) * lambda > 1.0, "(1-σ)λ > 1"),
        (sigma * nu > 0.5, "σν > 1/2"),
    ];
    violated.extend(checks.iter().filter(|c| !c.0).map(|c| c.1.to_string()));
    Validation {
        ok: violated.is_empty(),
        violated,
    }
}

/// The closed-form description of the feasible set:
/// `(λ-1)/λ > σ > 1/(2ν)`, `λ > 2ν/(2ν-1)`, `ν > 1/2`.
pub fn equivalent_conditions(sigma: f64, lambda: f64, nu: f64) -> bool {
    nu > 0.5
        && lambda > 0.0
        && (lambda - 1.0) / lambda > sigma
        && sigma > 1.0 / (2.0 * nu)
        && lambda > 2.0 * nu / (2.0 * nu - 1.0)
}

/// Unchecked bounds of the admissible open interval for `μ`.
pub fn mu_bounds(sigma: f64, lambda: f64, nu: f64) -> (f64, f64) {
    let lo = ((1.0 + sigma) * lambda + nu + 0.5)
        .max(1.0 + sigma * lambda + nu)
        .max(1.0 + sigma * nu + lambda);
    let hi = 2.0 * lambda + (1.0 + sigma) * nu - 1.0;
    (lo, hi)
}

/// Open interval `(lo, hi)` of admissible `μ`.
pub fn mu_window(sigma: f64, lambda: f64, nu: f64) -> Result<(f64, f64), SchedulerError> {
    let (lo, hi) = mu_bounds(sigma, lambda, nu);
    if lo >= hi {
        return Err(SchedulerError::EmptyWindow { lo, hi });
    }
    Ok((lo, hi))
}

/// Upper bound `(2λ - σ - 2 - λσ(1+σ)) / (λ(1+σ)²)` on the gain exponent ω₀.
pub fn omega0_bound(sigma: f64, lambda: f64) -> f64 {
    (2.0 * lambda - sigma - 2.0 - lambda * sigma * (1.0 + sigma))
        / (lambda * (1.0 + sigma) * (1.0 + sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerParams {
    pub sigma: f64,
    #[serde(rename = "lambda")]
    pub lambda_: f64,
    pub mu: f64,
    pub nu: f64,
    pub a: f64,
    pub gamma0: f64,
    pub s0: f64,
    pub b: f64,
    pub omega0_max: f64,
    #[serde(rename = "N1")]
    pub n1: usize,
    pub tau: f64,
    pub d: usize,
}

impl SchedulerParams {
    /// `σ = 1/2, λ = 3, μ = 7.5, ν = 2`.
    pub fn default_for(tau: f64, d: usize, n1: usize) -> Self {
        derive_constants(tau, d, 0.5, 3.0, 7.5, 2.0, n1).expect("default parameters are feasible")
    }

    /// `ω₀` used for the improved envelope: half its upper bound.
    pub fn omega0(&self) -> f64 {
        0.5 * self.omega0_max
    }
}

pub fn derive_constants(
    tau: f64,
    d: usize,
    sigma: f64,
    lambda: f64,
    mu: f64,
    nu: f64,
    n1: usize,
) -> Result<SchedulerParams, SchedulerError> {
    let v = validate(sigma, lambda, nu);
    if !v.ok {
        return Err(SchedulerError::InfeasibleParams(v.violated.join("; ")));
    }
    let (lo, hi) = mu_window(sigma, lambda, nu)?;
    if !(mu > lo && mu < hi) {
        return Err(SchedulerError::InfeasibleParams(format!(
            "μ = {mu} outside ({lo}, {hi})"
        )));
    }
    if !(tau > 0.0) || d == 0 {
        return Err(SchedulerError::InfeasibleParams(format!(
            "τ = {tau}, d = {d}"
        )));
    }
    if n1 < 2 {
        return Err(SchedulerError::InfeasibleParams("N1 must be >= 2".into()));
    }
    let a = 2.0 * tau + d as f64 + 2.0;
    Ok(SchedulerParams {
        sigma,
        lambda_: lambda,
        mu,
        nu,
        a,
        gamma0: lambda * a,
        s0: mu * a,
        b: nu * a,
        omega0_max: omega0_bound(sigma, lambda),
        n1,
        tau,
        d,
    })
}

/// `N₁^{(1+σ)^{n-1}}` as a real number.
pub fn schedule_real(n1: f64, sigma: f64, n: usize) -> f64 {
    n1.powf((1.0 + sigma).powi(n as i32 - 1))
}

/// `ceil(N₁^{(1+σ)^{n-1}})`, refusing values above `cap`.
pub fn schedule_n(n1: usize, sigma: f64, n: usize, cap: usize) -> Result<usize, SchedulerError> {
    if n1 < 2 || n < 1 {
        return Err(SchedulerError::InvalidInput(format!("N1 = {n1}, n = {n}")));
    }
    let x = schedule_real(n1 as f64, sigma, n);
    if !(x <= cap as f64) {
        return Err(SchedulerError::Overflow { n, value: x, cap });
    }
    // Values within roundoff of an integer are that integer.
    let r = x.round();
    let v = if (x - r).abs() <= 1e-9 * r {
        r
    } else {
        x.ceil()
    };
    Ok(v as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityMargin {
    pub name: String,
    /// `lhs - rhs`; the inequality holds iff this is positive.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductiveReport {
    pub margins: Vec<InequalityMargin>,
    pub all_hold: bool,
    /// `λ > 1`, which makes `Ie` redundant given `Ia`.
    pub ie_implied_by_ia: bool,
}

/// Margins of the seven inequalities `Ia`–`Ig` in `(σ, λ, μ, ν)`.
pub fn check_inductive_inequalities(p: &SchedulerParams) -> InductiveReport {
    let (s, l, m, n) = (p.sigma, p.lambda_, p.mu, p.nu);
    let rows = [
        ("Ia", (1.0 - s) * l - 1.0),
        ("Ib", m - (1.0 + s) * l - n - 0.5),
        ("Ic", m - n - s * l - 1.0),
        ("Id", 2.0 * l + (1.0 + s) * n - m - 1.0),
        ("Ie", s * n + l - 1.0),
        ("If", s * n - 0.5),
        ("Ig", m - s * n - l - 1.0),
    ];
    let margins: Vec<InequalityMargin> = rows
        .iter()
        .map(|(name, margin)| InequalityMargin {
            name: name.to_string(),
            margin: *margin,
        })
        .collect();
    let all_hold = margins.iter().all(|r| r.margin > 0.0);
    let ia = margins[0].margin > 0.0;
    let ie = margins[4].margin > 0.0;
    InductiveReport {
        margins,
        all_hold,
        ie_implied_by_ia: !ia || (l > 1.0 && ie),
    }
}

/// Exponent conditions read directly off the two recursions replayed by
/// [`replay_induction`], in units of `a`: each margin must be positive for
/// the corresponding term to stay below its next envelope as `N₁ → ∞`.
///
/// The last one, from `N^{s₀+a} ε₀ ε_{s₀}`, reduces to `λ + σν - μ > 1`,
/// which is the opposite of `Ig`; on the feasible set it is always negative.
pub fn recursion_exponent_margins(p: &SchedulerParams) -> Vec<InequalityMargin> {
    let (a, g, s0, b, q) = (p.a, p.gamma0, p.s0, p.b, 1.0 + p.sigma);
    let rows = [
        ("a - 2γ₀ < -(1+σ)γ₀", -q * g - (a - 2.0 * g)),
        ("a/2 - 2γ₀ < -(1+σ)γ₀", -q * g - (a / 2.0 - 2.0 * g)),
        ("-s₀ + a/2 + b < -(1+σ)γ₀", -q * g - (-s0 + a / 2.0 + b)),
        ("-s₀ + a - γ₀ + b < -(1+σ)γ₀", -q * g - (-s0 + a - g + b)),
        ("s₀ + a - 2γ₀ < (1+σ)b", q * b - (s0 + a - 2.0 * g)),
        ("a/2 - γ₀ + b < (1+σ)b", q * b - (a / 2.0 - g + b)),
        ("a/2 + b < (1+σ)b", q * b - (a / 2.0 + b)),
        ("s₀ + a - γ₀ + b < (1+σ)b", q * b - (s0 + a - g + b)),
    ];
    rows.iter()
        .map(|(name, m)| InequalityMargin {
            name: name.to_string(),
            margin: m / a,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelopes {
    #[serde(rename = "N")]
    pub n_trunc: usize,
    /// `N_n^{-γ₀}`.
    pub eps0_envelope: f64,
    /// `N_n^{b}`.
    pub eps_s0_envelope: f64,
    /// `N_n^{-(1+ω₀)γ₀}`.
    pub eps0_improved: f64,
}

pub fn envelopes(p: &SchedulerParams, n: usize, cap: usize) -> Result<Envelopes, SchedulerError> {
    let nn = schedule_n(p.n1, p.sigma, n, cap)?;
    let x = nn as f64;
    Ok(Envelopes {
        n_trunc: nn,
        eps0_envelope: x.powf(-p.gamma0),
        eps_s0_envelope: x.powf(p.b),
        eps0_improved: x.powf(-(1.0 + p.omega0()) * p.gamma0),
    })
}

fn log_sum(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub n: usize,
    pub ln_n: f64,
    pub ln_eps0: f64,
    pub ln_eps_s0: f64,
    pub ln_eps0_envelope: f64,
    pub ln_eps_s0_envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub n1: f64,
    pub rows: Vec<ReplayRow>,
    /// Both envelopes held strictly at every step after the first.
    pub preserved: bool,
}

/// Iterates the two scalar recursions of the induction with unit constants,
/// in natural-log space, starting on the envelopes at `n = 1`:
///
/// `ε₀' = N^a ε₀² + N^{a/2} ε₀² + N^{-s₀+a/2}(1 + N^{a/2} ε₀) ε_{s₀}`
/// `ε_{s₀}' = N^{s₀+a} ε₀² + N^{a/2} ε₀ ε_{s₀} + N^{a/2}(1 + N^{s₀+a/2} ε₀) ε_{s₀}`
pub fn replay_induction(p: &SchedulerParams, n1: f64, steps: usize) -> ReplayReport {
    let (a, s0, g0, b) = (p.a, p.s0, p.gamma0, p.b);
    let ln_n_at = |n: usize| n1.ln() * (1.0 + p.sigma).powi(n as i32 - 1);
    let mut ln_n = ln_n_at(1);
    let mut e0 = -g0 * ln_n;
    let mut es = b * ln_n;
    let mut rows = vec![ReplayRow {
        n: 1,
        ln_n,
        ln_eps0: e0,
        ln_eps_s0: es,
        ln_eps0_envelope: e0,
        ln_eps_s0_envelope: es,
    }];
    let mut preserved = true;
    for n in 2..=steps + 1 {
        let l = ln_n;
        let mix0 = log_sum(&[0.0, a / 2.0 * l + e0]);
        let mixs = log_sum(&[0.0, (s0 + a / 2.0) * l + e0]);
        let next0 = log_sum(&[
            a * l + 2.0 * e0,
            a / 2.0 * l + 2.0 * e0,
            (-s0 + a / 2.0) * l + mix0 + es,
        ]);
        let nexts = log_sum(&[
            (s0 + a) * l + 2.0 * e0,
            a / 2.0 * l + e0 + es,
            a / 2.0 * l + mixs + es,
        ]);
        e0 = next0;
        es = nexts;
        ln_n = ln_n_at(n);
        let row = ReplayRow {
            n,
            ln_n,
            ln_eps0: e0,
            ln_eps_s0: es,
            ln_eps0_envelope: -g0 * ln_n,
            ln_eps_s0_envelope: b * ln_n,
        };
        if !(row.ln_eps0 < row.ln_eps0_envelope && row.ln_eps_s0 < row.ln_eps_s0_envelope) {
            preserved = false;
        }
        rows.push(row);
    }
    ReplayReport {
        n1,
        rows,
        preserved,
    }
}

/// Smallest integer `N₁ >= 2` (up to `max_n1`) for which the replay
/// preserves both envelopes for `steps` iterations: doubling, then
/// bisection.
pub fn find_replay_threshold(p: &SchedulerParams, steps: usize, max_n1: u64) -> Option<u64> {
    let ok = |n1: u64| replay_induction(p, n1 as f64, steps).preserved;
    if ok(2) {
        return Some(2);
    }
    let mut hi = 2u64;
    while !ok(hi) {
        if hi >= max_n1 {
            return None;
        }
        hi = (hi * 2).min(max_n1);
    }
    bisect(&ok, hi / 2, hi)
}

/// Smallest passing value in `(lo, hi]` given `!ok(lo)` and `ok(hi)`.
fn bisect(ok: &dyn Fn(u64) -> bool, mut lo: u64, mut hi: u64) -> Option<u64> {
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
