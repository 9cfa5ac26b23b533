//! Rotation vectors, rotation sets and displacement hulls of torus lifts.
//!
//! Everything is computed on the lift: orbits are never reduced mod `Z^d`
//! when accumulating displacements, only when evaluating the periodic part.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::par;
use crate::spectral::{l1, Grid, TorusMapLift, Transformer};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `(F^n(x) - x) / n` on the lift.
///
/// Displacements `ρ + u(y)` are summed with compensation while `y` is kept
/// in `[0, 1)^d` for evaluating `u`, so long orbits lose no digits to the
/// growing integer part.
pub fn birkhoff_rotation(f: &TorusMapLift, x: &[f64], n: usize) -> Vec<f64> {
    assert!(n >= 1, "need at least one iterate");
    assert_eq!(x.len(), f.dim(), "point dimension mismatch");
    let dim = f.dim();
    let mut y: Vec<f64> = x.iter().map(|v| v.rem_euclid(1.0)).collect();
    let mut acc = vec![Compensated::default(); dim];
    let mut step = vec![0.0; dim];
    for _ in 0..n {
        for (st, (r, u)) in step.iter_mut().zip(f.rho().iter().zip(f.displacement())) {
            *st = r + u.evaluate(&y);
        }
        for ((a, yi), st) in acc.iter_mut().zip(y.iter_mut()).zip(&step) {
            a.add(*st);
            *yi = (*yi + st).rem_euclid(1.0);
        }
    }
    acc.iter().map(|a| a.value() / n as f64).collect()
}

/// Convex set in `R^d`: an interval for `d = 1`, a polygon with
/// counterclockwise vertices for `d = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Polytope {
    Interval { lo: f64, hi: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

/// A hull of sampled vectors together with how it was sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hull {
    pub shape: Polytope,
    /// Grid nodes per axis (displacement hulls) or orbit count (rotation hulls).
    pub resolution: usize,
    /// Euclidean distance within which every unsampled point of the
    /// underlying continuous set lies; zero when the samples are exhaustive.
    pub tolerance: f64,
}

impl Hull {
    /// Hull of a finite point set in dimension 1 or 2.
    pub fn from_points(dim: usize, points: &[Vec<f64>], resolution: usize, tolerance: f64) -> Self {
        assert!(!points.is_empty(), "hull of an empty set");
        let shape = match dim {
            1 => {
                let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let hi = points
                    .iter()
                    .map(|p| p[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                Polytope::Interval { lo, hi }
            }
            2 => {
                let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
                Polytope::Polygon {
                    vertices: monotone_chain(pts),
                }
            }
            _ => panic!("hulls are only implemented for d = 1, 2"),
        };
        Hull {
            shape,
            resolution,
            tolerance,
        }
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Polytope::Interval { .. } => 1,
            Polytope::Polygon { .. } => 2,
        }
    }

    /// Vertices as vectors: the two endpoints of an interval, or the polygon
    /// corners in counterclockwise order.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match &self.shape {
            Polytope::Interval { lo, hi } => {
                if lo == hi {
                    vec![vec![*lo]]
                } else {
                    vec![vec![*lo], vec![*hi]]
                }
            }
            Polytope::Polygon { vertices } => vertices.iter().map(|v| v.to_vec()).collect(),
        }
    }

    /// Largest distance between two points of the hull.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Polytope::Interval { lo, hi } => hi - lo,
            Polytope::Polygon { vertices } => {
                let mut best = 0.0f64;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        best = best.max((a[0] - b[0]).hypot(a[1] - b[1]));
                    }
                }
                best
            }
        }
    }

    /// Whether `p` lies within Euclidean distance `tol` of the hull.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        match &self.shape {
            Polytope::Interval { lo, hi } => p[0] >= lo - tol && p[0] <= hi + tol,
            Polytope::Polygon { vertices } => polygon_contains(vertices, [p[0], p[1]], tol),
        }
    }

    /// Whether every vertex of `inner` lies in this hull inflated by `tol`.
    /// For convex sets that is containment of the whole of `inner`.
    pub fn contains_hull(&self, inner: &Hull, tol: f64) -> bool {
        inner.vertices().iter().all(|v| self.contains(v, tol))
    }

    /// Vertex list as CSV with header `x` or `x,y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.dim() == 1 { "x\n" } else { "x,y\n" });
        for v in self.vertices() {
            let row: Vec<String> = v.iter().map(|c| format!("{c:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain. Collinear points are dropped, so the output has
/// one vertex for a repeated point, two for a segment.
fn monotone_chain(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn polygon_contains(vertices: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    let n = vertices.len();
    if n == 0 {
        return false;
    }
    if n >= 3 {
        let inside = (0..n).all(|i| cross(vertices[i], vertices[(i + 1) % n], p) >= 0.0);
        if inside {
            return true;
        }
    }
    let dist = if n == 1 {
        (p[0] - vertices[0][0]).hypot(p[1] - vertices[0][1])
    } else {
        (0..n)
            .map(|i| segment_distance(vertices[i], vertices[(i + 1) % n], p))
            .fold(f64::INFINITY, f64::min)
    };
    dist <= tol
}

/// `hull.contains(alpha, tol)`.
pub fn hull_contains(hull: &Hull, alpha: &[f64], tol: f64) -> bool {
    hull.contains(alpha, tol)
}

/// Bound on how far the displacement at an arbitrary point can be from the
/// displacement at the nearest node of a grid with `resolution` nodes per
/// axis: `√d · h/2 · max_i Σ_k 2π|k|₁ |c_k(u_i)|`.
pub fn sampling_tolerance(f: &TorusMapLift, resolution: usize) -> f64 {
    let lip = f
        .displacement()
        .iter()
        .map(|u| {
            u.modes()
                .map(|(k, c)| 2.0 * PI * l1(k) as f64 * c.norm())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    (f.dim() as f64).sqrt() * lip / (2.0 * resolution as f64)
}

/// Hull of `F(x_j) - x_j` over a uniform grid of `grid_resolution` nodes per
/// axis. Resolutions below `2·degree + 1` are raised to that value.
pub fn displacement_hull(f: &TorusMapLift, grid_resolution: usize) -> Hull {
    let res = grid_resolution.max(2 * f.degree() + 1).max(1);
    let grid = Grid::new(f.dim(), res);
    let tr = Transformer::new(grid);
    let comps: Vec<Vec<f64>> = f
        .displacement()
        .iter()
        .zip(f.rho())
        .map(|(u, r)| tr.synthesize_real(u).into_iter().map(|v| v + r).collect())
        .collect();
    let points: Vec<Vec<f64>> = (0..grid.len())
        .map(|j| comps.iter().map(|c| c[j]).collect())
        .collect();
    Hull::from_points(f.dim(), &points, res, sampling_tolerance(f, res))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub x0: Vec<f64>,
    pub n_iter: usize,
    pub average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationData {
    pub samples: Vec<OrbitSample>,
    pub displacement_hull: Hull,
    pub rotation_hull: Hull,
}

impl RotationData {
    /// Birkhoff table as CSV: `x0[,y0],n_iter,rho_x[,rho_y]`.
    pub fn samples_csv(&self) -> String {
        let dim = self.displacement_hull.dim();
        let mut out = String::from(if dim == 1 {
            "x0,n_iter,rho_x\n"
        } else {
            "x0,y0,n_iter,rho_x,rho_y\n"
        });
        for s in &self.samples {
            let mut row: Vec<String> = s.x0.iter().map(|v| format!("{v:e}")).collect();
            row.push(s.n_iter.to_string());
            row.extend(s.average.iter().map(|v| format!("{v:e}")));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Initial points spread over `T^d`: `(j + 1/2)/n` in `d = 1`, a Kronecker
/// lattice with golden-mean second coordinate in `d = 2`.
pub fn spread_points(dim: usize, n: usize) -> Vec<Vec<f64>> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    (0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) / n as f64;
            if dim == 1 {
                vec![t]
            } else {
                vec![t, ((j as f64 + 0.5) * g).rem_euclid(1.0)]
            }
        })
        .collect()
}

/// Birkhoff averages from `n_samples` spread initial points plus both hulls.
/// The displacement hull is sampled on `max(64, 8·degree)` nodes per axis.
pub fn rotation_set_estimate(f: &TorusMapLift, n_samples: usize, n_iter: usize) -> RotationData {
    assert!(n_samples >= 1 && n_iter >= 1);
    let starts = spread_points(f.dim(), n_samples);
    let averages = par::map_range(starts.len(), |j| birkhoff_rotation(f, &starts[j], n_iter));
    let rotation_hull = Hull::from_points(f.dim(), &averages, n_samples, 0.0);
    let res = (8 * f.degree()).max(64);
    let samples = starts
        .into_iter()
        .zip(averages)
        .map(|(x0, average)| OrbitSample {
            x0,
            n_iter,
            average,
        })
        .collect();
    RotationData {
        samples,
        displacement_hull: displacement_hull(f, res),
        rotation_hull,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{conjugate, PeriodicField};

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn sine_map(alpha: f64, eps: f64) -> TorusMapLift {
        TorusMapLift::new(
            vec![alpha],
            vec![PeriodicField::harmonic(1, [1, 0], 0.0, eps)],
        )
        .unwrap()
    }

    #[test]
    fn rotation_average_is_alpha() {
        let alpha = [golden(), 2f64.sqrt() - 1.0];
        let r = TorusMapLift::rotation(alpha.to_vec());
        let avg = birkhoff_rotation(&r, &[0.3, 0.9], 10_000);
        for i in 0..2 {
            assert!((avg[i] - alpha[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_map_average_in_interval() {
        let (a, eps) = (golden(), 0.05);
        let f = sine_map(a, eps);
        for x in [0.0, 0.17, 0.5, 0.8] {
            let v = birkhoff_rotation(&f, &[x], 5000)[0];
            assert!(v >= a - eps && v <= a + eps);
        }
    }

    #[test]
    fn conjugate_average_telescopes() {
        let a = golden();
        let h = TorusMapLift::new(
            vec![0.0],
            vec![PeriodicField::harmonic(1, [1, 0], 0.0, 0.01)],
        )
        .unwrap();
        let f = conjugate(&h, &TorusMapLift::rotation(vec![a]), 48).unwrap();
        let h0 = 0.01;
        for n in [10, 100, 1000] {
            let v = birkhoff_rotation(&f, &[0.3], n)[0];
            assert!((v - a).abs() <= 2.0 * h0 / n as f64 + 1e-14, "n={n}");
        }
    }

    #[test]
    fn rigid_rotation_hulls_are_points() {
        let r = TorusMapLift::rotation(vec![0.3, 0.7]);
        let data = rotation_set_estimate(&r, 9, 100);
        assert!(data.displacement_hull.diameter() < 1e-12);
        assert!(data.rotation_hull.diameter() < 1e-12);
        assert!(data.rotation_hull.contains(&[0.3, 0.7], 1e-12));
    }

    #[test]
    fn sine_interval_hull() {
        let (a, eps) = (golden(), 0.02);
        let f = sine_map(a, eps);
        for res in [16, 17, 63] {
            let hull = displacement_hull(&f, res);
            let Polytope::Interval { lo, hi } = hull.shape else {
                panic!()
            };
            let tol = 1.0 / (res * res) as f64;
            assert!((lo - (a - eps)).abs() <= tol * eps * 50.0);
            assert!((hi - (a + eps)).abs() <= tol * eps * 50.0);
        }
    }

    #[test]
    fn planar_hull_contains_axis_extremes() {
        let (e1, e2) = (0.03, 0.02);
        let f = TorusMapLift::new(
            vec![0.0, 0.0],
            vec![
                PeriodicField::harmonic(2, [1, 0], e1, 0.0),
                PeriodicField::harmonic(2, [0, 1], 0.0, e2),
            ],
        )
        .unwrap();
        let hull = displacement_hull(&f, 16);
        for p in [[e1, 0.0], [-e1, 0.0], [0.0, e2], [0.0, -e2]] {
            assert!(hull.contains(&p, 1e-15), "{p:?}");
        }
        let Polytope::Polygon { vertices } = &hull.shape else {
            panic!()
        };
        // Counterclockwise: positive signed area.
        let n = vertices.len();
        let area: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        assert!(area > 0.0);
    }

    #[test]
    fn interval_containment() {
        let h = Hull::from_points(1, &[vec![0.4], vec![0.6]], 2, 0.0);
        assert!(hull_contains(&h, &[0.5], 0.0));
        assert!(!hull_contains(&h, &[0.7], 0.0));
        let p = Hull::from_points(1, &[vec![0.5]], 1, 0.0);
        assert!(hull_contains(&p, &[0.5], 0.0));
    }

    #[test]
    fn square_boundary_with_tolerance() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
        ];
        let h = Hull::from_points(2, &pts, 2, 0.0);
        assert_eq!(h.vertices().len(), 4);
        assert!(h.contains(&[1.0 + 1e-9, 0.5], 1e-8));
        assert!(!h.contains(&[1.0 + 1e-7, 0.5], 1e-8));
        assert!(h.contains(&[0.5, 0.5], 0.0));
    }

    #[test]
    fn degenerate_polygons() {
        let seg = Hull::from_points(2, &[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5]], 3, 0.0);
        assert_eq!(seg.vertices().len(), 2);
        assert!(seg.contains(&[0.25, 0.25], 1e-15));
        assert!(!seg.contains(&[0.25, 0.3], 1e-3));
    }

    #[test]
    fn invariant_circles_with_distinct_rotation() {
        // F(x, y) = (x + a cos 2πy, y): every circle y = c is invariant and
        // rotates by a cos 2πc, so the rotation set spans [-a, a] × {0}.
        let a = golden() / 10.0;
        let f = TorusMapLift::new(
            vec![0.0, 0.0],
            vec![
                PeriodicField::harmonic(2, [0, 1], a, 0.0),
                PeriodicField::zeros(2, 1),
            ],
        )
        .unwrap();
        let up = birkhoff_rotation(&f, &[0.1, 0.0], 1000);
        let down = birkhoff_rotation(&f, &[0.1, 0.5], 1000);
        assert!((up[0] - a).abs() < 1e-14 && (down[0] + a).abs() < 1e-14);
        let data = rotation_set_estimate(&f, 16, 2000);
        assert!(data.rotation_hull.diameter() > a);
        let tol = data.displacement_hull.tolerance + 1e-12;
        assert!(data
            .displacement_hull
            .contains_hull(&data.rotation_hull, tol));
    }

    #[test]
    fn averages_inside_displacement_hull() {
        let f = TorusMapLift::new(
            vec![0.31, 0.57],
            vec![
                PeriodicField::harmonic(2, [1, 1], 0.01, 0.004),
                PeriodicField::harmonic(2, [2, -1], -0.003, 0.006),
            ],
        )
        .unwrap();
        let data = rotation_set_estimate(&f, 12, 3000);
        let tol = data.displacement_hull.tolerance + 1e-12;
        assert!(data
            .displacement_hull
            .contains_hull(&data.rotation_hull, tol));
    }

    #[test]
    fn csv_export_shape() {
        let h = Hull::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], 3, 0.0);
        let csv = h.to_csv();
        assert!(csv.starts_with("x,y\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
