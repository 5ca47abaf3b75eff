use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use hemicap::asymptotics::{error_term_log_ratios, sent_retention_limit_at_zero};
use hemicap::geometry::{is_hemispherical, sample_uniform_sphere};
use hemicap::wendel::{wendel_log_complement, wendel_probability_log_domain};

fn wendel(c: &mut Criterion) {
    c.bench_function("wendel_log_domain_n1000", |b| {
        b.iter(|| wendel_probability_log_domain(black_box(1000), black_box(1500)).unwrap())
    });
    c.bench_function("wendel_log_complement_n1000", |b| {
        b.iter(|| wendel_log_complement(black_box(1000), black_box(1500)).unwrap())
    });
}

fn hemisphere_test(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points: Vec<_> = (0..60)
        .map(|_| sample_uniform_sphere(40, 1.0, &mut rng).unwrap())
        .collect();
    c.bench_function("min_norm_point_n40_N60", |b| {
        b.iter(|| is_hemispherical(black_box(&points), 1e-9).unwrap())
    });
}

fn limits(c: &mut Criterion) {
    c.bench_function("sent_retention_limit", |b| {
        b.iter(|| sent_retention_limit_at_zero(black_box(0.5), 1.0).unwrap())
    });
    c.bench_function("error_term_ratios_n1000", |b| {
        b.iter(|| error_term_log_ratios(black_box(1000), 2.5, 0.1, 1.0).unwrap())
    });
}

criterion_group!(benches, wendel, hemisphere_test, limits);
criterion_main!(benches);
