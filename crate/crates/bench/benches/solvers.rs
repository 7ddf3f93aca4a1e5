use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rstokes_bench::{fractional, grid, interval, inverse_problem, mild_problem};
use rstokes_core::inverse::reconstruct;
use rstokes_core::kernels::MemoryKernel;
use rstokes_core::mild::{picard_solve, PicardOptions};
use rstokes_core::relaxation::relaxation_batch;
use rstokes_core::resolvent::ResolventContext;

fn relaxation(c: &mut Criterion) {
    let basis = interval(64);
    let mut group = c.benchmark_group("relaxation_batch");
    group.sample_size(10);
    for steps in [256, 1024, 4096] {
        let g = grid(steps);
        group.bench_with_input(BenchmarkId::new("fractional", steps), &g, |b, g| {
            b.iter(|| relaxation_batch(&fractional(), basis.lambdas(), g).unwrap())
        });
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let basis = interval(32);
    let (spec, l, xi) = mild_problem(&basis);
    let mut group = c.benchmark_group("picard_solve");
    group.sample_size(10);
    for steps in [128, 512] {
        let ctx = ResolventContext::new(basis.clone(), fractional(), &grid(steps)).unwrap();
        group.bench_with_input(BenchmarkId::new("fractional", steps), &ctx, |b, ctx| {
            b.iter(|| picard_solve(ctx, &spec, &l, &xi, &PicardOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn inverse(c: &mut Criterion) {
    let basis = interval(32);
    let ctx = ResolventContext::new(basis, MemoryKernel::exponential(1.0, 1.0).unwrap(), &grid(512)).unwrap();
    let spec = inverse_problem(&ctx);
    let mut group = c.benchmark_group("reconstruct");
    group.sample_size(10);
    group.bench_function("exponential_512", |b| {
        b.iter(|| reconstruct(&ctx, &spec, &PicardOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, relaxation, picard, inverse);
criterion_main!(benches);
