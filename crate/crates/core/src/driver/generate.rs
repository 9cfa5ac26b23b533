//! Oracle maps for experiments and tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::arithmetic::half_ball;
use crate::spectral::{
    conjugate, field_norm, l1, Freq, NormMethod, PeriodicField, SpectralError, TorusMapLift,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("generator outside the near-identity regime: {0}")]
    OutOfRegime(String),
    #[error("invalid generator parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `cos · cos(2πk·x) + sin · sin(2πk·x)` added to displacement `component`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    #[serde(default)]
    pub component: usize,
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// The conjugating map `h = Id + w` of a `conjugate` generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HSpec {
    Explicit {
        modes: Vec<ModeSpec>,
    },
    /// Random `w` of the given degree, coefficients decaying like
    /// `|k|₁^{-2}`, rescaled so that `max_i sup |w_i| = sup_norm`.
    Random {
        degree: usize,
        sup_norm: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `h ∘ R_α ∘ h⁻¹`, projected to `degree` (default `8·deg h + 8`).
    Conjugate {
        h: HSpec,
        #[serde(default)]
        degree: Option<usize>,
    },
    /// `R_{α+δ}` plus the listed modes.
    Drifted {
        delta: Vec<f64>,
        #[serde(default)]
        modes: Vec<ModeSpec>,
    },
    /// `R_α + ε·(one harmonic)`: `sin` (default) or `cos` in `component`.
    SingleMode {
        eps: f64,
        k: Vec<i64>,
        #[serde(default)]
        component: usize,
        #[serde(default)]
        cosine: bool,
    },
    /// `R_α` plus, in every component, `|c_k| = ε|k|₁^{-p}` for
    /// `0 < |k|₁ <= degree` with uniformly random phases.
    RandomDecay {
        eps: f64,
        p: f64,
        degree: usize,
        seed: u64,
    },
}

fn freq(dim: usize, k: &[i64]) -> Result<Freq, GenerateError> {
    match (dim, k.len()) {
        (1, 1) => Ok([k[0], 0]),
        (2, 2) => Ok([k[0], k[1]]),
        _ => Err(GenerateError::Invalid(format!(
            "frequency {k:?} in d = {dim}"
        ))),
    }
}

fn apply_modes(dim: usize, modes: &[ModeSpec]) -> Result<Vec<PeriodicField>, GenerateError> {
    let mut comps = vec![PeriodicField::zeros(dim, 0); dim];
    for m in modes {
        if m.component >= dim {
            return Err(GenerateError::Invalid(format!(
                "component {} in d = {dim}",
                m.component
            )));
        }
        comps[m.component].add_harmonic(freq(dim, &m.k)?, m.cos, m.sin);
    }
    Ok(comps)
}

fn random_field(
    dim: usize,
    degree: usize,
    rng: &mut ChaCha8Rng,
    modulus: impl Fn(Freq) -> f64,
) -> PeriodicField {
    let mut f = PeriodicField::zeros(dim, degree);
    for k in half_ball(dim, degree) {
        let theta = rng.gen_range(0.0..2.0 * PI);
        f.set_pair(k, Complex64::from_polar(modulus(k), theta))
            .expect("k lies in the ball");
    }
    f
}

fn build_h(dim: usize, spec: &HSpec) -> Result<TorusMapLift, GenerateError> {
    let comps = match spec {
        HSpec::Explicit { modes } => apply_modes(dim, modes)?,
        HSpec::Random {
            degree,
            sup_norm,
            seed,
        } => {
            if *degree == 0 || !(*sup_norm >= 0.0) {
                return Err(GenerateError::Invalid(
                    "random h needs degree >= 1, sup_norm >= 0".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let raw: Vec<PeriodicField> = (0..dim)
                .map(|_| random_field(dim, *degree, &mut rng, |k| (l1(k) as f64).powi(-2)))
                .collect();
            let peak = raw
                .iter()
                .map(|u| field_norm(u, 0, NormMethod::GridSup).value)
                .fold(0.0, f64::max);
            raw.iter().map(|u| u.scaled(sup_norm / peak)).collect()
        }
    };
    let h = TorusMapLift::new(vec![0.0; dim], comps)?;
    let jac = h.jacobian_sup();
    if jac >= 0.5 {
        return Err(GenerateError::OutOfRegime(format!(
            "sup |Dh - I| = {jac:.3e} >= 1/2"
        )));
    }
    Ok(h)
}

/// The conjugating map of a `conjugate` spec, for checking recovered chains.
pub fn conjugating_map(
    spec: &GeneratorSpec,
    dim: usize,
) -> Option<Result<TorusMapLift, GenerateError>> {
    match spec {
        GeneratorSpec::Conjugate { h, .. } => Some(build_h(dim, h)),
        _ => None,
    }
}

pub fn make_test_map(spec: &GeneratorSpec, alpha: &[f64]) -> Result<TorusMapLift, GenerateError> {
    let dim = alpha.len();
    if !(dim == 1 || dim == 2) {
        return Err(GenerateError::Invalid(format!("d = {dim}")));
    }
    let rotation = TorusMapLift::rotation(alpha.to_vec());
    match spec {
        GeneratorSpec::Conjugate { h, degree } => {
            let h = build_h(dim, h)?;
            let target = degree.unwrap_or(8 * h.degree() + 8);
            Ok(conjugate(&h, &rotation, target)?)
        }
        GeneratorSpec::Drifted { delta, modes } => {
            if delta.len() != dim {
                return Err(GenerateError::Invalid(format!(
                    "δ has {} entries",
                    delta.len()
                )));
            }
            let rho = alpha.iter().zip(delta).map(|(a, d)| a + d).collect();
            Ok(TorusMapLift::new(rho, apply_modes(dim, modes)?)?)
        }
        GeneratorSpec::SingleMode {
            eps,
            k,
            component,
            cosine,
        } => {
            let (c, s) = if *cosine { (*eps, 0.0) } else { (0.0, *eps) };
            let mode = ModeSpec {
                component: *component,
                k: k.clone(),
                cos: c,
                sin: s,
            };
            if freq(dim, k)? == [0, 0] {
                return Err(GenerateError::Invalid("single mode needs k != 0".into()));
            }
            Ok(TorusMapLift::new(
                alpha.to_vec(),
                apply_modes(dim, &[mode])?,
            )?)
        }
        GeneratorSpec::RandomDecay {
            eps,
            p,
            degree,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let comps = (0..dim)
                .map(|_| random_field(dim, *degree, &mut rng, |k| eps * (l1(k) as f64).powf(-p)))
                .collect();
            let f = TorusMapLift::new(alpha.to_vec(), comps)?;
            let jac = f.jacobian_sup();
            if jac >= 1.0 {
                return Err(GenerateError::OutOfRegime(format!(
                    "sup |Du| = {jac:.3e} >= 1"
                )));
            }
            Ok(f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::golden_mean;

    #[test]
    fn identity_h_gives_rotation() {
        let spec = GeneratorSpec::Conjugate {
            h: HSpec::Explicit { modes: vec![] },
            degree: None,
        };
        let f = make_test_map(&spec, &[golden_mean()]).unwrap();
        assert!(f.max_diff(&TorusMapLift::rotation(vec![golden_mean()])) < 1e-15);
    }

    #[test]
    fn single_mode_has_eps_norm() {
        let spec = GeneratorSpec::SingleMode {
            eps: 1e-3,
            k: vec![1],
            component: 0,
            cosine: true,
        };
        let a = golden_mean();
        let f = make_test_map(&spec, &[a]).unwrap();
        let e = f.distance_to_rotation(&[a], 0, NormMethod::GridSup);
        assert!((e - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn random_decay_is_reproducible() {
        let spec = GeneratorSpec::RandomDecay {
            eps: 1e-3,
            p: 3.0,
            degree: 6,
            seed: 42,
        };
        let a = make_test_map(&spec, &[0.3, 0.4]).unwrap();
        let b = make_test_map(&spec, &[0.3, 0.4]).unwrap();
        assert_eq!(a, b);
        let c2 = a.displacement()[0].coeff([2, 1]).norm();
        assert!((c2 - 1e-3 * 3f64.powi(-3)).abs() < 1e-18);
    }

    #[test]
    fn large_h_is_refused() {
        let spec = GeneratorSpec::Conjugate {
            h: HSpec::Explicit {
                modes: vec![ModeSpec {
                    component: 0,
                    k: vec![1],
                    cos: 0.0,
                    sin: 0.1,
                }],
            },
            degree: None,
        };
        assert!(matches!(
            make_test_map(&spec, &[golden_mean()]),
            Err(GenerateError::OutOfRegime(_))
        ));
    }

    #[test]
    fn random_h_hits_requested_norm() {
        let spec = HSpec::Random {
            degree: 2,
            sup_norm: 0.01,
            seed: 5,
        };
        let h = build_h(2, &spec).unwrap();
        let n = h.displacement_norm(0, NormMethod::GridSup).value;
        assert!((n - 0.01).abs() < 1e-15);
    }
}
