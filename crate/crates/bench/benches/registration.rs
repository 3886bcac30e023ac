use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tanreg::cpd::points_to_matrix;
use tanreg::pipeline::warp_tangent_scene;
use tanreg::{cpd_register, RegistrationConfig};
use tanreg_bench::wavy_curve;

fn registration_100(c: &mut Criterion) {
    let x_curve = wavy_curve(100, 40.0, 0.02);
    let y_curve = wavy_curve(100, 25.0, 0.02);
    let x = points_to_matrix(x_curve.nodes());
    let y = points_to_matrix(y_curve.nodes());
    let config = RegistrationConfig {
        tol: 0.0, // force the full 100 iterations
        ..RegistrationConfig::default()
    };
    c.bench_function("cpd_register M=N=100, 100 iters", |b| {
        b.iter(|| cpd_register(black_box(&x), black_box(&y), &config).unwrap())
    });
}

fn warp_100(c: &mut Criterion) {
    let train_before = wavy_curve(100, 40.0, 0.02);
    let train_after = wavy_curve(100, 5.0, 0.02);
    let test_before = wavy_curve(100, 55.0, 0.02);
    let config = RegistrationConfig::default();
    c.bench_function("warp_tangent_scene M=N=100", |b| {
        b.iter(|| {
            warp_tangent_scene(
                black_box(&train_before),
                black_box(&train_after),
                black_box(&test_before),
                &config,
                10.0,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, registration_100, warp_100);
criterion_main!(benches);
