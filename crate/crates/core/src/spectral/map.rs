use super::field::PeriodicField;
use super::grid::{smooth_at_least, Grid, OffsetSampler, Transformer};
use super::norm::{components_norm, NormEstimate, NormMethod};
use super::SpectralError;
use crate::par;

/// Default fixed-point tolerance for [`invert_near_identity`].
pub const DEFAULT_INVERSION_TOL: f64 = 1e-12;
/// Fixed-point sweeps before an inversion is declared stalled.
pub const MAX_INVERSION_SWEEPS: usize = 100;
const MAX_INVERSE_DEGREE_1D: usize = 4096;
const MAX_INVERSE_DEGREE_2D: usize = 256;

/// Lift `F(x) = x + rho + u(x)` of a torus map isotopic to the identity, with
/// `u` a vector of periodic fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusMapLift {
    rho: Vec<f64>,
    displacement: Vec<PeriodicField>,
}

/// Non-fatal findings reported next to a composed map.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralWarning {
    /// The output degree is below the sum of the input degrees, so part of
    /// the composed spectrum is cut off.
    AliasingRisk {
        target_degree: usize,
        input_degrees: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Composed {
    pub map: TorusMapLift,
    pub warnings: Vec<SpectralWarning>,
}

impl TorusMapLift {
    pub fn new(rho: Vec<f64>, displacement: Vec<PeriodicField>) -> Result<Self, SpectralError> {
        let dim = rho.len();
        if !(dim == 1 || dim == 2) {
            return Err(SpectralError::UnsupportedDimension(dim));
        }
        if displacement.len() != dim {
            return Err(SpectralError::DimensionMismatch {
                expected: dim,
                found: displacement.len(),
            });
        }
        if let Some(f) = displacement.iter().find(|f| f.dim() != dim) {
            return Err(SpectralError::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
        Ok(TorusMapLift { rho, displacement })
    }

    pub fn identity(dim: usize) -> Self {
        Self::rotation(vec![0.0; dim])
    }

    /// The rigid rotation `R_rho`.
    pub fn rotation(rho: Vec<f64>) -> Self {
        let dim = rho.len();
        let displacement = (0..dim).map(|_| PeriodicField::zeros(dim, 0)).collect();
        TorusMapLift { rho, displacement }
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    pub fn degree(&self) -> usize {
        self.displacement
            .iter()
            .map(|f| f.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn displacement(&self) -> &[PeriodicField] {
        &self.displacement
    }

    /// Value of the lift at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| x[i] + self.rho[i] + self.displacement[i].evaluate(x))
            .collect()
    }

    /// Same map with the displacement means moved into `rho`.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim() {
            let m = out.displacement[i].mean();
            out.rho[i] += m;
            out.displacement[i]
                .set_pair([0, 0], 0.0.into())
                .expect("zero mode is always stored");
        }
        out
    }

    /// Largest difference in `rho` or in any displacement coefficient, after
    /// normalizing both maps.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let a = self.normalized();
        let b = other.normalized();
        let dr = a
            .rho
            .iter()
            .zip(&b.rho)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        a.displacement
            .iter()
            .zip(&b.displacement)
            .map(|(f, g)| f.max_coeff_diff(g))
            .fold(dr, f64::max)
    }

    pub fn displacement_norm(&self, s: u32, method: NormMethod) -> NormEstimate {
        components_norm(&self.displacement, s, method)
    }

    /// `‖F - (x + target)‖_{C^s}` with the constant offset reduced mod `Z^d`
    /// to its representative nearest zero.
    pub fn distance_to_rotation(&self, target: &[f64], s: u32, method: NormMethod) -> f64 {
        let fields: Vec<PeriodicField> = self
            .displacement
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let drift = reduce_mod_one(self.rho[i] - target[i]);
                f.add(&PeriodicField::constant(self.dim(), drift))
            })
            .collect();
        components_norm(&fields, s, method).value
    }

    /// Sup over an oversampled grid of the row-sum norm of `Du`.
    pub fn jacobian_sup(&self) -> f64 {
        let deg = self.degree();
        if self.displacement.iter().all(|f| f.is_zero()) {
            return 0.0;
        }
        let tr = Transformer::new(Grid::oversampled(self.dim(), deg.max(1)));
        jacobian_sup_on(&tr, &self.displacement)
    }
}

pub(crate) fn jacobian_sup_on(tr: &Transformer, disp: &[PeriodicField]) -> f64 {
    let grid = tr.grid();
    let dim = grid.dim;
    let mut best = 0.0f64;
    for u in disp {
        let mut rowsum = vec![0.0; grid.len()];
        for axis in 0..dim {
            let mut ord = [0u32; 2];
            ord[axis] = 1;
            let d = tr.synthesize_real(&u.derivative(ord));
            rowsum.iter_mut().zip(&d).for_each(|(r, v)| *r += v.abs());
        }
        best = rowsum.iter().fold(best, |a, v| a.max(*v));
    }
    best
}

/// `x - round(x)`, i.e. the representative in `[-1/2, 1/2]`.
pub fn reduce_mod_one(x: f64) -> f64 {
    x - x.round()
}

fn max_abs(values: &[Vec<f64>]) -> f64 {
    values
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0, |a, v| a.max(v.abs()))
}

fn check_dims(a: &TorusMapLift, b: &TorusMapLift) -> Result<(), SpectralError> {
    if a.dim() != b.dim() {
        return Err(SpectralError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Grid able to resolve every input degree and hold `4·target + 1` nodes.
fn working_grid(dim: usize, degrees: &[usize], target: usize) -> Grid {
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    Grid::new(dim, smooth_at_least((4 * target + 1).max(2 * max_deg + 1)))
}

/// Values of `u` at `x_j + base`, one vector per component.
fn sample_at(tr: &Transformer, u: &[PeriodicField], base: &[f64]) -> Vec<Vec<f64>> {
    u.iter()
        .map(|f| tr.synthesize_real(&f.translated(base)))
        .collect()
}

/// `G(F(x_j + base)) - (x_j + base)`, split into its constant part
/// `rho_f + rho_g` and the per-node remainder.
fn composed_displacement(
    tr: &Transformer,
    g: &TorusMapLift,
    f: &TorusMapLift,
    base: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let uf = sample_at(tr, &f.displacement, base);
    let w = max_abs(&uf);
    let shift: Vec<f64> = base.iter().zip(&f.rho).map(|(b, r)| b + r).collect();
    let mut var = uf.clone();
    for (i, ug) in g.displacement.iter().enumerate() {
        let vals = OffsetSampler::new(tr, ug, &shift, w).sample(&uf);
        var[i].iter_mut().zip(&vals).for_each(|(a, b)| *a += b);
    }
    let konst = f.rho.iter().zip(&g.rho).map(|(a, b)| a + b).collect();
    (konst, var)
}

/// Re-projects per-node displacements `konst + var` onto a lift of degree
/// `target`, with the mean folded into `rho`.
fn project(tr: &Transformer, konst: &[f64], var: &[Vec<f64>], target: usize) -> TorusMapLift {
    let mut rho = konst.to_vec();
    let displacement = var
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut field = tr.analyze(v, target);
            rho[i] += field.mean();
            field.set_pair([0, 0], 0.0.into()).expect("zero mode");
            field
        })
        .collect();
    TorusMapLift { rho, displacement }
}

/// Spectral re-projection of `g ∘ f` at degree `target_degree`.
///
/// `g ∘ f` is sampled on a grid of at least `4·target_degree + 1` nodes per
/// axis and transformed back. The translation parts add up and any mean
/// displacement is folded into `rho`, so the result is a lift of the composed
/// torus map.
pub fn compose(
    g: &TorusMapLift,
    f: &TorusMapLift,
    target_degree: usize,
) -> Result<Composed, SpectralError> {
    check_dims(g, f)?;
    let jac = f.jacobian_sup();
    if jac >= 1.0 {
        return Err(SpectralError::NotDiffeomorphism { jacobian: jac });
    }
    let mut warnings = Vec::new();
    let sum = g.degree() + f.degree();
    if target_degree < sum {
        log::debug!("compose: target degree {target_degree} below input degree sum {sum}");
        warnings.push(SpectralWarning::AliasingRisk {
            target_degree,
            input_degrees: sum,
        });
    }
    let grid = working_grid(f.dim(), &[g.degree(), f.degree()], target_degree);
    let tr = Transformer::new(grid);
    let (konst, var) = composed_displacement(&tr, g, f, &vec![0.0; f.dim()]);
    Ok(Composed {
        map: project(&tr, &konst, &var, target_degree),
        warnings,
    })
}

/// Per-node offsets `q_j` with `phi^{-1}(x_j) = x_j - rho_phi + q_j`, found
/// by the fixed-point sweep `q ← -u(x - rho_phi + q)`.
fn inverse_offsets(
    tr: &Transformer,
    phi: &TorusMapLift,
    tol: f64,
) -> Result<Vec<Vec<f64>>, SpectralError> {
    let jac = jacobian_sup_on(tr, &phi.displacement);
    if jac >= 0.5 {
        return Err(SpectralError::NotContractive { jacobian: jac });
    }
    let grid = tr.grid();
    let shift: Vec<f64> = phi.rho.iter().map(|r| -r).collect();
    let w_max = phi
        .displacement
        .iter()
        .map(|u| u.coeff_l1())
        .fold(0.0, f64::max);
    let samplers: Vec<OffsetSampler> = phi
        .displacement
        .iter()
        .map(|u| OffsetSampler::new(tr, u, &shift, w_max))
        .collect();
    let mut q = vec![vec![0.0; grid.len()]; grid.dim];
    let mut last = f64::INFINITY;
    for _ in 0..MAX_INVERSION_SWEEPS {
        let next: Vec<Vec<f64>> = samplers
            .iter()
            .map(|s| s.sample(&q).into_iter().map(|v| -v).collect())
            .collect();
        let delta = next
            .iter()
            .zip(&q)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        q = next;
        last = delta;
        if delta <= tol {
            return Ok(q);
        }
    }
    Err(SpectralError::NoConvergence {
        residual: last,
        sweeps: MAX_INVERSION_SWEEPS,
    })
}

/// `sup_x |G(F(x)) - x|` on the half-cell staggered version of the grid that
/// resolves both maps.
pub fn identity_residual(g: &TorusMapLift, f: &TorusMapLift) -> Result<f64, SpectralError> {
    check_dims(g, f)?;
    let deg = g.degree().max(f.degree()).max(1);
    let grid = Grid::oversampled(f.dim(), deg);
    let tr = Transformer::new(grid);
    let base = vec![0.5 * grid.spacing(); f.dim()];
    let (konst, var) = composed_displacement(&tr, g, f, &base);
    Ok(var
        .iter()
        .zip(&konst)
        .flat_map(|(v, c)| v.iter().map(move |x| (x + c).abs()))
        .fold(0.0, f64::max))
}

/// Inverse of a near-identity lift to within `tol` in both composition
/// orders. The output degree is doubled until the staggered-grid residuals
/// `‖phi∘psi - Id‖₀` and `‖psi∘phi - Id‖₀` are below `tol`.
pub fn invert_near_identity(phi: &TorusMapLift, tol: f64) -> Result<TorusMapLift, SpectralError> {
    let cap = if phi.dim() == 1 {
        MAX_INVERSE_DEGREE_1D
    } else {
        MAX_INVERSE_DEGREE_2D
    };
    let mut degree = (4 * phi.degree()).clamp(8, cap);
    let mut worst = f64::INFINITY;
    loop {
        let psi = invert_with_degree(phi, tol, degree)?;
        let r1 = identity_residual(phi, &psi)?;
        let r2 = identity_residual(&psi, phi)?;
        worst = worst.min(r1.max(r2));
        if r1 <= tol && r2 <= tol {
            return Ok(psi);
        }
        if degree >= cap {
            return Err(SpectralError::NoConvergence {
                residual: worst,
                sweeps: MAX_INVERSION_SWEEPS,
            });
        }
        degree = (degree * 2).min(cap);
    }
}

/// Inverse projected at a fixed `degree`.
pub fn invert_with_degree(
    phi: &TorusMapLift,
    tol: f64,
    degree: usize,
) -> Result<TorusMapLift, SpectralError> {
    let grid = working_grid(phi.dim(), &[phi.degree()], degree);
    let tr = Transformer::new(grid);
    let q = inverse_offsets(&tr, phi, tol * 1e-2)?;
    let konst: Vec<f64> = phi.rho.iter().map(|r| -r).collect();
    Ok(project(&tr, &konst, &q, degree))
}

/// `phi ∘ f ∘ phi^{-1}` at degree `target_degree`, evaluated node by node
/// (inverse by fixed point, then `F`, then `phi`) and projected once. The
/// resulting `rho` carries the mean displacement of the conjugated lift.
pub fn conjugate(
    phi: &TorusMapLift,
    f: &TorusMapLift,
    target_degree: usize,
) -> Result<TorusMapLift, SpectralError> {
    check_dims(phi, f)?;
    let dim = f.dim();
    let grid = working_grid(dim, &[phi.degree(), f.degree()], target_degree);
    let tr = Transformer::new(grid);
    if phi.displacement.iter().all(|u| u.is_zero()) {
        // Pure translation: conjugation leaves the lift unchanged.
        let uf = sample_at(&tr, &f.displacement, &vec![0.0; dim]);
        return Ok(project(&tr, &f.rho, &uf, target_degree));
    }
    let q = inverse_offsets(&tr, phi, DEFAULT_INVERSION_TOL * 1e-3)?;
    let shift_y: Vec<f64> = phi.rho.iter().map(|r| -r).collect();
    let wq = max_abs(&q);
    let mut r = q.clone();
    for (i, u) in f.displacement.iter().enumerate() {
        let vals = OffsetSampler::new(&tr, u, &shift_y, wq).sample(&q);
        r[i].iter_mut().zip(&vals).for_each(|(a, b)| *a += b);
    }
    let shift_z: Vec<f64> = f.rho.iter().zip(&phi.rho).map(|(a, c)| a - c).collect();
    let wr = max_abs(&r);
    let mut total = r.clone();
    for (i, u) in phi.displacement.iter().enumerate() {
        let vals = OffsetSampler::new(&tr, u, &shift_z, wr).sample(&r);
        total[i].iter_mut().zip(&vals).for_each(|(a, b)| *a += b);
    }
    Ok(project(&tr, &f.rho, &total, target_degree))
}

/// `sup_j |A(B(x_j)) - C(D(x_j))|` over a grid of `n` nodes per axis, by
/// direct evaluation. Meant for verification, not for hot loops.
pub fn commutation_defect(
    a: &TorusMapLift,
    b: &TorusMapLift,
    c: &TorusMapLift,
    d: &TorusMapLift,
    n: usize,
) -> f64 {
    let grid = Grid::new(a.dim(), n);
    par::max_range(grid.len(), |j| {
        let x = grid.node(j);
        let lhs = a.evaluate(&b.evaluate(&x));
        let rhs = c.evaluate(&d.evaluate(&x));
        lhs.iter()
            .zip(&rhs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    })
}
