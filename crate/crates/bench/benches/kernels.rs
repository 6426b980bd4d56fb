use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spdense_core::lyapunov::replica_exponents;
use spdense_core::{
    certify_energy, generator_set, lie_closure_rank, op_norm, power_in_neighborhood, principal_log_power, qr_4x4,
    simultaneous_approx, transfer_matrix, BernoulliConfig, CertifyConfig, LogWitness, Mat4, RngSeed,
};

fn sample() -> Mat4 {
    Mat4(std::array::from_fn(|k| ((k * 7 + 3) % 11) as f64 / 5.0 - 1.0))
}

fn small_kernels(c: &mut Criterion) {
    let a = sample();
    let b = transfer_matrix(3.0, BernoulliConfig::ONE_ONE).unwrap().a;
    c.bench_function("qr_4x4", |bch| bch.iter(|| qr_4x4(black_box(&a))));
    c.bench_function("matmul_4x4", |bch| bch.iter(|| black_box(a) * black_box(b)));
    c.bench_function("op_norm", |bch| bch.iter(|| op_norm(black_box(&a))));
}

fn search(c: &mut Criterion) {
    let t = transfer_matrix(3.0, BernoulliConfig::ZERO_ZERO).unwrap();
    c.bench_function("simultaneous_approx_1e6", |bch| {
        bch.iter(|| simultaneous_approx(black_box(t.r1), black_box(t.r2), 1_000_000).unwrap())
    });
}

fn algebra(c: &mut Criterion) {
    let cfg = CertifyConfig::default();
    let logs: Vec<LogWitness> = BernoulliConfig::ALL
        .iter()
        .map(|&w| {
            let t = transfer_matrix(3.0, w).unwrap();
            let np = power_in_neighborhood(&t, cfg.big_m, cfg.delta, cfg.max_retries).unwrap();
            principal_log_power(&t, &np.hit).unwrap()
        })
        .collect();
    let gens: Vec<_> = logs.iter().map(|l| l.la).collect();
    c.bench_function("lie_closure_rank", |bch| {
        bch.iter(|| lie_closure_rank(black_box(&gens), 1e-7).unwrap())
    });
    let mut group = c.benchmark_group("certify");
    group.sample_size(10);
    group.bench_function("certify_energy_3", |bch| {
        bch.iter(|| certify_energy(black_box(3.0), &cfg).unwrap())
    });
    group.finish();
}

fn lyapunov(c: &mut Criterion) {
    let ens = generator_set(3.0, 0.5).unwrap().ensemble();
    let mut group = c.benchmark_group("lyapunov");
    group.sample_size(20);
    group.bench_function("replica_10k_steps", |bch| {
        bch.iter(|| replica_exponents(&ens, 10_000, 100, RngSeed::new(1, 0), 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, small_kernels, search, algebra, lyapunov);
criterion_main!(benches);
