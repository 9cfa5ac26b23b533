//! Parallel core against one worker. With `--no-default-features` only the
//! sequential build is measured.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use kam_torus::rotation::rotation_set_estimate;
use kam_torus::spectral::{
    commutation_defect, conjugate, field_norm, NormMethod, PeriodicField, TorusMapLift,
};

fn field_2d(degree: usize) -> PeriodicField {
    let mut f = PeriodicField::zeros(2, degree);
    for k1 in 0..=degree as i64 {
        for k2 in -(degree as i64 - k1)..=(degree as i64 - k1) {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let w = 1e-3 / (1.0 + (k1.abs() + k2.abs()) as f64).powi(3);
            f.add_harmonic([k1, k2], w, 0.5 * w);
        }
    }
    f
}

fn near_identity(rho: Vec<f64>, degree: usize) -> TorusMapLift {
    let u = field_2d(degree);
    TorusMapLift::new(rho, vec![u.clone(), u.scaled(-0.5)]).unwrap()
}

type Workload = (&'static str, Box<dyn Fn() + Sync>);

fn workloads() -> Vec<Workload> {
    let g = field_2d(64);
    let phi = near_identity(vec![0.0, 0.0], 12);
    let f = near_identity(vec![2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0], 12);
    let circle = TorusMapLift::new(
        vec![(5f64.sqrt() - 1.0) / 2.0],
        vec![PeriodicField::harmonic(1, [1, 0], 0.0, 0.01)],
    )
    .unwrap();
    let (f2, phi2) = (f.clone(), phi.clone());
    vec![
        (
            "grid_sup_c1_deg64",
            Box::new(move || {
                black_box(field_norm(&g, 1, NormMethod::GridSup));
            }),
        ),
        (
            "conjugate_deg12_to_32",
            Box::new(move || {
                black_box(conjugate(&phi, &f, 32).unwrap());
            }),
        ),
        (
            "birkhoff_64x2000",
            Box::new(move || {
                black_box(rotation_set_estimate(&circle, 64, 2000));
            }),
        ),
        (
            "commutation_defect_64",
            Box::new(move || {
                black_box(commutation_defect(&phi2, &f2, &f2, &phi2, 64));
            }),
        ),
    ]
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("core");
    group.sample_size(10);
    for (name, work) in workloads() {
        #[cfg(feature = "parallel")]
        {
            let single = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap();
            group.bench_function(BenchmarkId::new(name, "1-thread"), |b| {
                b.iter(|| single.install(&work))
            });
            let threads = rayon::current_num_threads();
            group.bench_function(BenchmarkId::new(name, format!("{threads}-threads")), |b| {
                b.iter(&work)
            });
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_function(BenchmarkId::new(name, "sequential"), |b| b.iter(&work));
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
