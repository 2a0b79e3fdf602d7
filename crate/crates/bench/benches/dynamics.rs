use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use popdyn_bench::core::{
    brute_force_equilibria, integrate_brd, integrate_dad, run_da, run_fp, ChannelConfig, DaInit,
    Entropic, Euclidean, Regularizer, Schedule,
};
use popdyn_bench::{builtin, scores, start};
use std::hint::black_box;

fn choice_maps(c: &mut Criterion) {
    let mut group = c.benchmark_group("choice");
    for n in [3, 16, 256] {
        let y = scores(n);
        let mut out = vec![0.0; n];
        let regs: [(&str, Box<dyn Regularizer>); 2] =
            [("entropic", Box::new(Entropic::new(n))), ("euclidean", Box::new(Euclidean::new(n)))];
        for (name, reg) in &regs {
            group.bench_with_input(BenchmarkId::new(*name, n), &y, |b, y| {
                b.iter(|| reg.choice_into(black_box(y), &mut out))
            });
        }
    }
    group.finish();
}

fn continuous(c: &mut Criterion) {
    let rps = builtin("rps");
    let x0 = start(3);
    let cfg = ChannelConfig::default();
    c.bench_function("brd rps T=10", |b| {
        b.iter(|| integrate_brd(rps.as_ref(), black_box(&x0), 10.0, 1e-3).unwrap())
    });
    let reg = Entropic::new(3);
    let eta = Schedule::constant(1.0);
    c.bench_function("dad rps T=10", |b| {
        b.iter(|| integrate_dad(rps.as_ref(), &reg, &eta, black_box(&[0.5, 0.0, -0.5]), 10.0, 1e-2, &cfg).unwrap())
    });
}

fn discrete(c: &mut Criterion) {
    let gess = builtin("gess");
    let cfg = ChannelConfig::default();
    let reg = Entropic::new(3);
    let eta = Schedule::power(1.0, 0.5, 0.0);
    let init = DaInit {
        s0: None,
        x1: Some(start(3)),
    };
    c.bench_function("da gess 1e4", |b| {
        b.iter(|| run_da(gess.as_ref(), &reg, &eta, &init, 10_000, &cfg).unwrap())
    });
    c.bench_function("fp gess 1e4", |b| {
        b.iter(|| run_fp(gess.as_ref(), &start(3), 10_000, &cfg).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let game = builtin("coordination3");
    let mut group = c.benchmark_group("brute force");
    group.sample_size(10);
    for step in [0.05, 0.02] {
        group.bench_with_input(BenchmarkId::from_parameter(step), &step, |b, &s| {
            b.iter(|| brute_force_equilibria(game.as_ref(), s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, choice_maps, continuous, discrete, oracle);
criterion_main!(benches);
