use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::field::{l1, PeriodicField};
use super::grid::{Grid, Transformer};

/// How a `C^s` norm is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    /// Max over `|σ| <= s` of the sup of `|∂^σ f|` on a 4×-oversampled grid.
    GridSup,
    /// `Σ_k max(1, (2π|k|₁)^s) |c_k|`, an upper bound for the grid value.
    FourierWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub s: u32,
    pub value: f64,
    pub method: NormMethod,
}

/// Multi-indices `σ` with `|σ| = m` in dimension `dim`.
pub(crate) fn multi_indices(dim: usize, m: u32) -> Vec<[u32; 2]> {
    if dim == 1 {
        vec![[m, 0]]
    } else {
        (0..=m).map(|a| [a, m - a]).collect()
    }
}

/// `C^s` norm of a single field.
pub fn field_norm(f: &PeriodicField, s: u32, method: NormMethod) -> NormEstimate {
    let value = match method {
        NormMethod::GridSup => {
            let tr = Transformer::new(Grid::oversampled(f.dim(), f.degree()));
            grid_sup(&tr, f, s)
        }
        NormMethod::FourierWeighted => weighted_sum(f, s),
    };
    NormEstimate { s, value, method }
}

/// Grid-sup `C^s` norm evaluated with an existing transformer.
pub(crate) fn grid_sup(tr: &Transformer, f: &PeriodicField, s: u32) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    let mut best = 0.0f64;
    for m in 0..=s {
        for sigma in multi_indices(f.dim(), m) {
            let vals = tr.synthesize_real(&f.derivative(sigma));
            best = vals.iter().fold(best, |acc, v| acc.max(v.abs()));
        }
    }
    best
}

fn weighted_sum(f: &PeriodicField, s: u32) -> f64 {
    f.modes()
        .map(|(k, c)| {
            let w = (2.0 * PI * l1(k) as f64).powi(s as i32);
            w.max(1.0) * c.norm()
        })
        .sum()
}

/// Norm of a vector of fields: the max over components.
pub fn components_norm(fields: &[PeriodicField], s: u32, method: NormMethod) -> NormEstimate {
    let value = fields
        .iter()
        .map(|f| field_norm(f, s, method).value)
        .fold(0.0, f64::max);
    NormEstimate { s, value, method }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_has_zero_norm() {
        let f = PeriodicField::zeros(2, 3);
        for s in 0..4 {
            assert_eq!(field_norm(&f, s, NormMethod::GridSup).value, 0.0);
            assert_eq!(field_norm(&f, s, NormMethod::FourierWeighted).value, 0.0);
        }
    }

    #[test]
    fn single_cosine_norms() {
        let eps = 1e-3;
        let f = PeriodicField::harmonic(1, [1, 0], eps, 0.0);
        let g1 = field_norm(&f, 1, NormMethod::GridSup).value;
        assert!((g1 - 2.0 * PI * eps).abs() < 1e-15);
        let w0 = field_norm(&f, 0, NormMethod::FourierWeighted).value;
        assert!((w0 - eps).abs() < 1e-18);
    }

    #[test]
    fn weighted_dominates_grid_with_mean() {
        let mut f = PeriodicField::constant(2, 3.0);
        f.add_harmonic([1, 1], 1e-3, 2e-3);
        f.add_harmonic([0, 2], 0.0, 1e-4);
        for s in 0..5 {
            let g = field_norm(&f, s, NormMethod::GridSup).value;
            let w = field_norm(&f, s, NormMethod::FourierWeighted).value;
            assert!(w >= g, "s={s}: {w} < {g}");
        }
    }
}
