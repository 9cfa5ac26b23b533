use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{l1, PeriodicField};
use crate::par;

/// Uniform collocation grid with `n` nodes per axis; node `j` sits at `j/n`.
/// Multi-dimensional samples are stored row-major with axis 0 outermost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim == 1 || dim == 2);
        assert!(n >= 1);
        Grid { dim, n }
    }

    /// Smallest FFT-friendly grid with at least `4·degree + 1` nodes per axis.
    pub fn oversampled(dim: usize, degree: usize) -> Self {
        // A multiple of 4 so that peaks of low modes fall on nodes.
        Grid::new(dim, 4 * smooth_at_least(degree + 1))
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Coordinates of node `j` along axis `axis`.
    #[inline]
    pub fn coord(&self, j: usize, axis: usize) -> f64 {
        let i = if self.dim == 1 {
            j
        } else if axis == 0 {
            j / self.n
        } else {
            j % self.n
        };
        i as f64 / self.n as f64
    }

    pub fn node(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|a| self.coord(j, a)).collect()
    }
}

/// Smallest integer `>= n` whose only prime factors are 2, 3 and 5.
pub fn smooth_at_least(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Forward/inverse FFT pair for one grid size.
pub(crate) struct Transformer {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Transformer {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Transformer {
            grid,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        par::for_each_chunk(data, n, |row| fft.process(row));
        if self.grid.dim == 2 {
            let mut t = transpose(data, n);
            par::for_each_chunk(&mut t, n, |row| fft.process(row));
            data.copy_from_slice(&transpose(&t, n));
        }
    }

    /// Values of `field` on the grid. Requires `n >= 2·degree + 1`.
    pub fn synthesize(&self, field: &PeriodicField) -> Vec<Complex64> {
        let n = self.grid.n;
        assert_eq!(field.dim(), self.grid.dim);
        assert!(
            n > 2 * field.degree(),
            "grid of {n} nodes cannot resolve degree {}",
            field.degree()
        );
        let mut data = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (k, c) in field.modes() {
            let i0 = k[0].rem_euclid(n as i64) as usize;
            let idx = if self.grid.dim == 1 {
                i0
            } else {
                i0 * n + k[1].rem_euclid(n as i64) as usize
            };
            data[idx] = c;
        }
        self.transform(&mut data, &self.inv);
        data
    }

    pub fn synthesize_real(&self, field: &PeriodicField) -> Vec<f64> {
        self.synthesize(field).into_iter().map(|c| c.re).collect()
    }

    /// Projects grid samples onto the ℓ¹ ball of radius `degree`.
    pub fn analyze(&self, values: &[f64], degree: usize) -> PeriodicField {
        let n = self.grid.n;
        assert_eq!(values.len(), self.grid.len());
        assert!(
            n > 2 * degree,
            "grid of {n} nodes cannot hold degree {degree}"
        );
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.fwd);
        let scale = 1.0 / self.grid.len() as f64;
        let mut out = PeriodicField::zeros(self.grid.dim, degree);
        let at = |k: [i64; 2]| {
            let i0 = k[0].rem_euclid(n as i64) as usize;
            if self.grid.dim == 1 {
                data[i0]
            } else {
                data[i0 * n + k[1].rem_euclid(n as i64) as usize]
            }
        };
        let ks: Vec<_> = out.frequencies().collect();
        for k in ks {
            if k[0] < 0 || (k[0] == 0 && k[1] < 0) {
                continue;
            }
            let c = (at(k) + at([-k[0], -k[1]]).conj()) * (0.5 * scale);
            out.set_pair(k, c).expect("k drawn from the ball");
        }
        out
    }
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = data[i * n + j];
        }
    }
    out
}

/// Highest Taylor order tried before falling back to direct summation.
const MAX_TAYLOR_ORDER: usize = 90;
/// Upper limit on `terms × nodes` held in memory by a precomputed sampler.
const MAX_TABLE_ENTRIES: usize = 40_000_000;
/// Relative accuracy target of the Taylor tail, against `Σ|c_k|`.
const TAYLOR_REL_TOL: f64 = 1e-17;

/// Evaluates one field at `x_j + shift + w_j` for grid nodes `x_j` and small
/// per-node offsets `w_j` with `|w_j|_∞ <= w_max`.
///
/// The field is expanded in a Taylor series around the nodes,
/// `f(x_j + w) = Σ_σ ∂^σ f(x_j) w^σ / σ!`, with every derivative obtained on
/// the grid by one FFT. The order is chosen from the coefficient bound
/// `Σ_k |c_k| (2π|k|₁ w_max)^m / m!`, so the truncation error is below
/// `1e-17 · Σ|c_k|`. When the offsets are too large for the series to settle
/// within the order cap the sampler switches to direct summation.
pub(crate) struct OffsetSampler {
    grid: Grid,
    mode: SamplerMode,
}

enum SamplerMode {
    Zero,
    Taylor {
        w_max: f64,
        /// Multi-indices `(a, b)` in order of increasing `a + b`.
        orders: Vec<[u32; 2]>,
        /// Point-major table: `table[j * terms + t]` is the scaled derivative
        /// of term `t` at node `j`.
        table: Vec<f64>,
    },
    Direct(PeriodicField),
}

impl OffsetSampler {
    pub fn new(tr: &Transformer, field: &PeriodicField, shift: &[f64], w_max: f64) -> Self {
        let grid = tr.grid();
        if field.is_zero() {
            return OffsetSampler {
                grid,
                mode: SamplerMode::Zero,
            };
        }
        let shifted = field.translated(shift);
        let w_max = w_max.max(0.0);
        let orders = match taylor_orders(&shifted, grid.dim, w_max) {
            Some(o) if o.len() * grid.len() <= MAX_TABLE_ENTRIES => o,
            _ => {
                return OffsetSampler {
                    grid,
                    mode: SamplerMode::Direct(shifted),
                };
            }
        };
        let terms = orders.len();
        let columns: Vec<Vec<f64>> = orders
            .iter()
            .map(|&ord| {
                let mut scaled = shifted.clone();
                for (k, c) in shifted.modes() {
                    let mut fac = Complex64::new(1.0, 0.0);
                    for axis in 0..2 {
                        let z = Complex64::new(0.0, 2.0 * PI * k[axis] as f64 * w_max);
                        for p in 1..=ord[axis] {
                            fac *= z / p as f64;
                        }
                    }
                    scaled.set_pair(k, c * fac).expect("same ball");
                }
                tr.synthesize_real(&scaled)
            })
            .collect();
        let mut table = vec![0.0; terms * grid.len()];
        for (t, col) in columns.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                table[j * terms + t] = *v;
            }
        }
        OffsetSampler {
            grid,
            mode: SamplerMode::Taylor {
                w_max,
                orders,
                table,
            },
        }
    }

    /// `offsets[axis][j]` is the offset of node `j` along `axis`.
    pub fn sample(&self, offsets: &[Vec<f64>]) -> Vec<f64> {
        let grid = self.grid;
        match &self.mode {
            SamplerMode::Zero => vec![0.0; grid.len()],
            SamplerMode::Direct(field) => par::map_range(grid.len(), |j| {
                let x: Vec<f64> = (0..grid.dim)
                    .map(|a| grid.coord(j, a) + offsets.get(a).map_or(0.0, |o| o[j]))
                    .collect();
                field.evaluate(&x)
            }),
            SamplerMode::Taylor {
                w_max,
                orders,
                table,
            } => {
                let terms = orders.len();
                let max_order = orders
                    .iter()
                    .map(|o| o[0].max(o[1]) as usize)
                    .max()
                    .unwrap_or(0);
                let inv = if *w_max > 0.0 { 1.0 / w_max } else { 0.0 };
                par::map_range(grid.len(), |j| {
                    let mut p0 = vec![1.0; max_order + 1];
                    let mut p1 = vec![1.0; max_order + 1];
                    let r0 = offsets.first().map_or(0.0, |o| o[j]) * inv;
                    let r1 = if grid.dim == 2 {
                        offsets[1][j] * inv
                    } else {
                        0.0
                    };
                    debug_assert!(r0.abs() <= 1.0 + 1e-9 && r1.abs() <= 1.0 + 1e-9);
                    for p in 1..=max_order {
                        p0[p] = p0[p - 1] * r0;
                        p1[p] = p1[p - 1] * r1;
                    }
                    let row = &table[j * terms..(j + 1) * terms];
                    orders
                        .iter()
                        .zip(row)
                        .map(|(o, v)| v * p0[o[0] as usize] * p1[o[1] as usize])
                        .sum()
                })
            }
        }
    }
}

/// Multi-indices needed for the requested accuracy, or `None` if the series
/// does not settle below [`MAX_TAYLOR_ORDER`].
fn taylor_orders(field: &PeriodicField, dim: usize, w_max: f64) -> Option<Vec<[u32; 2]>> {
    let radii: Vec<(f64, f64)> = field
        .modes()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| (c.norm(), 2.0 * PI * l1(k) as f64 * w_max))
        .collect();
    let total: f64 = radii.iter().map(|r| r.0).sum();
    let tol = TAYLOR_REL_TOL * total;
    let r_max = radii.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut terms = radii.iter().map(|r| r.0).collect::<Vec<_>>();
    let mut max_m = None;
    for m in 0..=MAX_TAYLOR_ORDER {
        if m > 0 {
            for (t, r) in terms.iter_mut().zip(&radii) {
                *t *= r.1 / m as f64;
            }
        }
        let bound: f64 = terms.iter().sum();
        if m as f64 >= 2.0 * r_max && 2.0 * bound <= tol {
            max_m = Some(m);
            break;
        }
    }
    let max_m = max_m?;
    let mut orders = Vec::new();
    for m in 0..max_m as u32 {
        if dim == 1 {
            orders.push([m, 0]);
        } else {
            for a in (0..=m).rev() {
                orders.push([a, m - a]);
            }
        }
    }
    if orders.is_empty() {
        orders.push([0, 0]);
    }
    Some(orders)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_field_2d() -> PeriodicField {
        let mut f = PeriodicField::zeros(2, 6);
        for (i, k) in f.frequencies().collect::<Vec<_>>().into_iter().enumerate() {
            if k[0] > 0 || (k[0] == 0 && k[1] > 0) {
                let amp = 0.5f64.powi(super::l1(k) as i32);
                f.set_pair(k, Complex64::from_polar(amp, i as f64)).unwrap();
            }
        }
        f
    }

    #[test]
    fn smooth_numbers() {
        assert_eq!(smooth_at_least(1), 1);
        assert_eq!(smooth_at_least(7), 8);
        assert_eq!(smooth_at_least(33), 36);
        assert_eq!(smooth_at_least(97), 100);
    }

    #[test]
    fn synthesize_analyze_round_trip() {
        let f = test_field_2d();
        let tr = Transformer::new(Grid::oversampled(2, f.degree()));
        let g = tr.analyze(&tr.synthesize_real(&f), f.degree());
        assert!(f.max_coeff_diff(&g) < 1e-15);
    }

    #[test]
    fn synthesize_matches_direct_summation() {
        let f = test_field_2d();
        let grid = Grid::new(2, 27);
        let tr = Transformer::new(grid);
        let vals = tr.synthesize_real(&f);
        for j in (0..grid.len()).step_by(37) {
            assert!((vals[j] - f.evaluate(&grid.node(j))).abs() < 1e-13);
        }
    }

    #[test]
    fn taylor_sampler_matches_direct() {
        let f = test_field_2d();
        let grid = Grid::oversampled(2, 12);
        let tr = Transformer::new(grid);
        let shift = [0.3, -0.17];
        let offs: Vec<Vec<f64>> = (0..2)
            .map(|a| {
                (0..grid.len())
                    .map(|j| 0.01 * ((j * (a + 3)) as f64).sin())
                    .collect()
            })
            .collect();
        let s = OffsetSampler::new(&tr, &f, &shift, 0.01);
        assert!(matches!(s.mode, SamplerMode::Taylor { .. }));
        let vals = s.sample(&offs);
        for j in (0..grid.len()).step_by(11) {
            let x = [
                grid.coord(j, 0) + shift[0] + offs[0][j],
                grid.coord(j, 1) + shift[1] + offs[1][j],
            ];
            assert!((vals[j] - f.evaluate(&x)).abs() < 1e-13, "node {j}");
        }
    }

    #[test]
    fn large_offsets_fall_back_to_direct() {
        let f = PeriodicField::harmonic(1, [40, 0], 0.0, 1.0);
        let grid = Grid::oversampled(1, 40);
        let tr = Transformer::new(grid);
        let s = OffsetSampler::new(&tr, &f, &[0.0], 0.4);
        assert!(matches!(s.mode, SamplerMode::Direct(_)));
        let offs = vec![vec![0.4; grid.len()]];
        let v = s.sample(&offs);
        let x = grid.coord(3, 0) + 0.4;
        assert!((v[3] - (2.0 * PI * 40.0 * x).sin()).abs() < 1e-11);
    }
}
