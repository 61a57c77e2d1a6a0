use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finsler_bench::{cubic_field, sample_spec, skew_norm, spd_of_dim};
use finsler_core::ops::finsler_p_laplacian;
use finsler_core::verifier::{check_liouville, check_theorem1};
use finsler_core::{CheckConfig, Norm, OperatorConfig, SpdMatrix};
use std::hint::black_box;

fn spd_sqrt(c: &mut Criterion) {
    let mut g = c.benchmark_group("spd_new");
    for n in [2, 4, 8] {
        let m = spd_of_dim(n).matrix().clone();
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| SpdMatrix::new(black_box(m)))
        });
    }
    g.finish();
}

fn operator(c: &mut Criterion) {
    let h = skew_norm();
    let u = cubic_field();
    let x = [0.4, -0.7];
    for (name, cfg) in [
        ("analytic", OperatorConfig::analytic(3.0)),
        ("nested_fd", OperatorConfig::finite_difference(3.0)),
    ] {
        c.bench_function(&format!("finsler_p_laplacian/{name}"), |b| {
            b.iter(|| finsler_p_laplacian(&h, &cfg, &u, black_box(&x)))
        });
    }
}

fn checks(c: &mut Criterion) {
    let h = skew_norm();
    let u = cubic_field();
    let spec = sample_spec(100);
    c.bench_function("check_theorem1/100", |b| {
        b.iter(|| check_theorem1(&h, &u, &spec, &CheckConfig::analytic(3.0)))
    });
    let id = Norm::euclidean(2).unwrap();
    let spec = finsler_core::SampleSpec::ball(1, 100, 5.0);
    let mut g = c.benchmark_group("check_liouville");
    g.sample_size(10);
    g.bench_function("density_2048", |b| {
        b.iter(|| check_liouville(&id, &spec, 200.0, 2048, &CheckConfig::analytic(2.0)))
    });
    g.finish();
}

criterion_group!(benches, spd_sqrt, operator, checks);
criterion_main!(benches);
