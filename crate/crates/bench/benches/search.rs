use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use circsearch::geometry::{default_grid, enumerate_trajectories, DEFAULT_TABLE_CAP};
use circsearch::infotheory::optimal_q;
use circsearch::{Codebook, Kappa, SearchParams, Searcher, Strategy, VelocityMode};
use circsearch_bench::linear_model;

fn codebook(c: &mut Criterion) {
    c.bench_function("codebook_draw_4096x256", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            Codebook::draw(4096, 256, 0.3, black_box(seed)).unwrap()
        })
    });
}

fn trajectories(c: &mut Criterion) {
    let (n, m) = (12, 64);
    let (gw, gv) = default_grid(n, m);
    c.bench_function("enumerate_trajectories_n12_m64", |b| {
        b.iter(|| enumerate_trajectories(black_box(n), m, gw, gv, DEFAULT_TABLE_CAP).unwrap())
    });
}

fn optimizer(c: &mut Criterion) {
    let model = linear_model();
    c.bench_function("optimal_q", |b| b.iter(|| optimal_q(black_box(&model), Kappa::One)));
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial");
    group.sample_size(20);
    let known = Searcher::new(Strategy::NonAdaptive, SearchParams::from_rate(linear_model(), 24, 0.1)).unwrap();
    let mut t = 0;
    group.bench_function("nonadaptive_known_n24", |b| {
        b.iter(|| {
            t += 1;
            known.trial(7, t).unwrap()
        })
    });
    let unknown = Searcher::new(
        Strategy::NonAdaptive,
        SearchParams::from_rate(linear_model(), 12, 0.1).with_velocity(VelocityMode::Unknown),
    )
    .unwrap();
    group.bench_function("nonadaptive_unknown_n12", |b| {
        b.iter(|| {
            t += 1;
            unknown.trial(7, t).unwrap()
        })
    });
    let mut p = SearchParams::from_rate(linear_model(), 48, 0.3);
    p.lambda = Some(0.8);
    let two = Searcher::new(Strategy::TwoPhase, p).unwrap();
    group.bench_function("two_phase_n48", |b| {
        b.iter(|| {
            t += 1;
            two.trial(7, t).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, codebook, trajectories, optimizer, trials);
criterion_main!(benches);
