use num_complex::Complex64;
use proptest::prelude::*;

use kam_torus::arithmetic::{golden_mean, half_ball, DiophantineVector};
use kam_torus::cohomology::{residual_sup, solve};
use kam_torus::driver::io::MapFile;
use kam_torus::driver::{NormTrace, TraceRow};
use kam_torus::rotation::Hull;
use kam_torus::scheduler::{equivalent_conditions, schedule_n, validate};
use kam_torus::spectral::{
    compose, field_norm, NormMethod, PeriodicField, TorusMapLift, Truncation,
};

fn field_from(dim: usize, degree: usize, mean: f64, vals: &[(f64, f64)]) -> PeriodicField {
    let mut f = PeriodicField::constant(dim, mean).resized(degree);
    for (k, &(re, im)) in half_ball(dim, degree).zip(vals.iter().cycle()) {
        f.set_pair(k, Complex64::new(re, im)).unwrap();
    }
    f
}

fn arb_field(dim: usize, degree: usize, scale: f64) -> impl Strategy<Value = PeriodicField> {
    (
        -scale..scale,
        prop::collection::vec((-scale..scale, -scale..scale), 1..24),
    )
        .prop_map(move |(m, v)| field_from(dim, degree, m, &v))
}

fn two_d_alpha() -> Vec<f64> {
    vec![2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0]
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn head_plus_tail_is_identity(f in arb_field(2, 9, 1.0), n in 0usize..12) {
        let head = f.truncate(n, Truncation::Inhomogeneous);
        let tail = f.truncate(n, Truncation::Tail);
        prop_assert!(head.add(&tail).max_coeff_diff(&f) == 0.0);
        let homog = f.truncate(n, Truncation::Homogeneous);
        prop_assert_eq!(homog.mean(), 0.0);
        prop_assert!(homog.max_coeff_diff(&head.sub(&PeriodicField::constant(2, f.mean()))) == 0.0);
    }

    #[test]
    fn translation_commutes_with_evaluation(
        f in arb_field(2, 6, 1.0),
        x in prop::array::uniform2(0.0..1.0f64),
        a in prop::array::uniform2(-1.0..1.0f64),
    ) {
        let lhs = f.translated(&a).evaluate(&x);
        let rhs = f.evaluate(&[x[0] + a[0], x[1] + a[1]]);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * f.coeff_l1().max(1.0));
    }

    #[test]
    fn grid_sup_is_below_weighted_norm(f in arb_field(1, 12, 1.0), s in 0u32..4) {
        let g = field_norm(&f, s, NormMethod::GridSup).value;
        let w = field_norm(&f, s, NormMethod::FourierWeighted).value;
        prop_assert!(g <= w * (1.0 + 1e-12));
    }

    #[test]
    fn cohomology_is_linear_and_exact(
        f in arb_field(2, 10, 1.0),
        g in arb_field(2, 10, 1.0),
        a in -2.0..2.0f64,
        n in 1usize..12,
    ) {
        let dv = DiophantineVector::with_best_gamma(&two_d_alpha(), 2.5, 16).unwrap();
        let pf = solve(&f, &dv, n).unwrap();
        let pg = solve(&g, &dv, n).unwrap();
        let pc = solve(&f.lin_comb(a, &g, 1.0), &dv, n).unwrap();
        let scale = pf.coeff_l1().max(pg.coeff_l1()).max(1.0) * (1.0 + a.abs());
        prop_assert!(pc.max_coeff_diff(&pf.lin_comb(a, &pg, 1.0)) <= 1e-12 * scale);
        prop_assert_eq!(pf.mean(), 0.0);
        let r = residual_sup(&pf, &f, dv.alpha(), n);
        prop_assert!(r <= 1e-10 * field_norm(&f, 0, NormMethod::GridSup).value.max(1e-300));
    }

    #[test]
    fn map_file_round_trip(
        u in arb_field(2, 5, 0.01),
        v in arb_field(2, 3, 0.01),
        rho in prop::array::uniform2(-3.0..3.0f64),
    ) {
        let f = TorusMapLift::new(rho.to_vec(), vec![u, v]).unwrap();
        let text = serde_json::to_string(&MapFile::from_map(&f)).unwrap();
        let back: MapFile = serde_json::from_str(&text).unwrap();
        let g = back.to_map().unwrap();
        prop_assert_eq!(MapFile::from_map(&g), MapFile::from_map(&f));
    }

    #[test]
    fn trace_csv_round_trip(vals in prop::collection::vec((1usize..50, 1usize..5000, prop::array::uniform7(-1e300..1e300f64), any::<bool>()), 0..6)) {
        let rows = vals
            .iter()
            .enumerate()
            .map(|(i, (n, nn, x, acc))| TraceRow {
                n: i + n,
                n_trunc: *nn,
                eps0: x[0],
                eps_s0: x[1],
                drift: x[2],
                drift_bound: x[3],
                env_eps0: x[4],
                env_eps_s0: x[5],
                phi_norm0: x[6],
                accepted: *acc,
            })
            .collect();
        let trace = NormTrace { rows };
        prop_assert_eq!(NormTrace::parse(&trace.to_csv()).unwrap(), trace);
    }

    #[test]
    fn compose_with_identity_is_neutral(u in arb_field(1, 6, 1e-3), rho in -1.0..1.0f64) {
        let f = TorusMapLift::new(vec![rho], vec![u]).unwrap();
        let id = TorusMapLift::identity(1);
        prop_assert!(compose(&f, &id, 6).unwrap().map.max_diff(&f) < 1e-13);
        prop_assert!(compose(&id, &f, 6).unwrap().map.max_diff(&f) < 1e-13);
    }

    #[test]
    fn validation_matches_closed_form(sigma in 0.001..0.999f64, lambda in 0.01..8.0f64, nu in 0.01..6.0f64) {
        prop_assert_eq!(validate(sigma, lambda, nu).ok, equivalent_conditions(sigma, lambda, nu));
    }

    #[test]
    fn schedule_is_nondecreasing(n1 in 2usize..40, sigma in 0.05..0.95f64) {
        let mut prev = 0;
        for n in 1..6 {
            match schedule_n(n1, sigma, n, 1 << 30) {
                Ok(v) => {
                    prop_assert!(v >= prev);
                    prev = v;
                }
                Err(_) => break,
            }
        }
    }

    #[test]
    fn hull_contains_its_points(pts in prop::collection::vec(prop::array::uniform2(-1.0..1.0f64), 1..30)) {
        let points: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let hull = Hull::from_points(2, &points, points.len(), 0.0);
        for p in &points {
            prop_assert!(hull.contains(p, 1e-12));
        }
        let c = [
            points.iter().map(|p| p[0]).sum::<f64>() / points.len() as f64,
            points.iter().map(|p| p[1]).sum::<f64>() / points.len() as f64,
        ];
        prop_assert!(hull.contains(&c, 1e-12));
        prop_assert!(!hull.contains(&[5.0, 5.0], 1e-12));
    }

    #[test]
    fn rotation_birkhoff_is_exact(a in 0.0..1.0f64, x in 0.0..1.0f64) {
        let f = TorusMapLift::rotation(vec![a]);
        let avg = kam_torus::rotation::birkhoff_rotation(&f, &[x], 1000);
        prop_assert!((avg[0] - a).abs() < 1e-13);
    }
}

#[test]
fn golden_mean_is_dc_with_expected_gamma() {
    let dv = DiophantineVector::with_best_gamma(&[golden_mean()], 1.5, 500).unwrap();
    assert!((dv.gamma() - 1.0 / (1.0 - golden_mean())).abs() < 1e-12);
}
