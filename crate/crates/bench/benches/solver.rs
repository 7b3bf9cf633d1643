use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use perspace::synth::SynthConfig;
use perspace::{
    classical_mds_init, discrepancy_matrix, guttman_step, mds, procrustes, GammaSchedule, LatentSpec,
    Manifold, SolverSettings, SyntheticCollection,
};

fn collection(n: usize) -> SyntheticCollection {
    SyntheticCollection::generate(&SynthConfig {
        n,
        m: 20,
        s: 4,
        r: 16,
        latent: LatentSpec { q: 3, manifold: Manifold::UnitSphere, seed: 1 },
        gamma: Some(GammaSchedule::Constant { c: 1.0 }),
        seed: 1,
    })
    .unwrap()
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("mds");
    for n in [10, 40, 100] {
        let target = collection(n).exact_limit_matrix();
        let settings = SolverSettings::new(2);
        group.bench_with_input(BenchmarkId::new("full", n), &target, |b, t| {
            b.iter(|| mds(black_box(t), &settings).unwrap())
        });
        let start = classical_mds_init(&target, 2).unwrap();
        group.bench_with_input(BenchmarkId::new("guttman_step", n), &start, |b, s| {
            b.iter(|| guttman_step(black_box(s), &target).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("classical_init", n), &target, |b, t| {
            b.iter(|| classical_mds_init(black_box(t), 2).unwrap())
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let coll = collection(20);
    let table = coll.sample_collection();
    c.bench_function("discrepancy/n20_m20_r16", |b| {
        b.iter(|| {
            let mats = perspace::discrepancy::mean_response_matrices(black_box(&table)).unwrap();
            discrepancy_matrix(&mats).unwrap()
        })
    });
    let settings = SolverSettings::new(2);
    let est = mds(&discrepancy_matrix(&perspace::discrepancy::mean_response_matrices(&table).unwrap()).unwrap(), &settings)
        .unwrap();
    let reference = mds(&coll.exact_limit_matrix(), &settings).unwrap();
    c.bench_function("procrustes/n20_d2", |b| {
        b.iter(|| procrustes(black_box(&est), &reference, true).unwrap())
    });
}

criterion_group!(benches, solver, pipeline);
criterion_main!(benches);
