use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cuebench_bench::{chain_program, distinct, fanout_program, ratings, rate_fixture, sentences, Lcg};
use cuebench_core::horn::{solve_with, SolveOptions};
use cuebench_core::miner::TfIdfIndex;
use cuebench_core::stats::{bh_adjust, mann_whitney, poisson_rate_glm, GlmOptions};
use std::hint::black_box;

fn horn(c: &mut Criterion) {
    let mut group = c.benchmark_group("horn");
    for depth in [8, 32, 128] {
        let (program, query) = chain_program(depth);
        group.bench_with_input(BenchmarkId::new("chain", depth), &depth, |b, _| {
            b.iter(|| solve_with(black_box(&program), &query, SolveOptions::default()).unwrap())
        });
    }
    for width in [50, 500] {
        let (program, query) = fanout_program(width);
        group.bench_with_input(BenchmarkId::new("fanout", width), &width, |b, _| {
            b.iter(|| solve_with(black_box(&program), &query, SolveOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn stats(c: &mut Criterion) {
    let mut rng = Lcg::new(1);
    let (a, b) = (distinct(&mut rng, 6), distinct(&mut rng, 6));
    c.bench_function("mann_whitney/exact_6x6", |bn| bn.iter(|| mann_whitney(black_box(&a), black_box(&b)).unwrap()));
    let (a, b) = (ratings(&mut rng, 200), ratings(&mut rng, 200));
    c.bench_function("mann_whitney/normal_200x200", |bn| bn.iter(|| mann_whitney(black_box(&a), black_box(&b)).unwrap()));

    let p: Vec<f64> = (0..1000).map(|_| rng.unit()).collect();
    c.bench_function("bh_adjust/1000", |bn| bn.iter(|| bh_adjust(black_box(&p)).unwrap()));

    let (counts, offsets, group) = rate_fixture(&mut rng, 400);
    c.bench_function("poisson_glm/400", |bn| {
        bn.iter(|| poisson_rate_glm(black_box(&counts), &offsets, &group, GlmOptions::default()).unwrap())
    });
}

fn tfidf(c: &mut Criterion) {
    let mut rng = Lcg::new(2);
    let docs = sentences(&mut rng, 2000, 12);
    c.bench_function("tfidf/index_2000", |b| b.iter(|| TfIdfIndex::new(black_box(&docs))));
    let index = TfIdfIndex::new(&docs);
    c.bench_function("tfidf/score_2000", |b| {
        b.iter(|| index.scores(black_box("rollback canary release latency"), 0..index.len()))
    });
}

criterion_group!(benches, horn, stats, tfidf);
criterion_main!(benches);
