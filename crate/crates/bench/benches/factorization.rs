use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use treefactor_core::enumeration::{pair, unpair};
use treefactor_core::sim::run;
use treefactor_core::sim::seeds::{adequate_host, fuzz_config};
use treefactor_core::{builtin_family, Engine, Family};

fn bench_pairing(c: &mut Criterion) {
    c.bench_function("pair round-trip 4096 codes", |b| {
        b.iter(|| {
            for n in 0..4096u64 {
                let (a, bb) = unpair(black_box(n));
                black_box(pair(a, bb).expect("in range"));
            }
        });
    });
}

fn fresh_engine(name: &str) -> Engine {
    Engine::new(Family::new(builtin_family(name).expect("builtin")).expect("valid"))
}

fn bench_ball(c: &mut Criterion) {
    let mut group = c.benchmark_group("materialize ball");
    // Fresh engine per iteration so memo tables never warm up across iters.
    group.bench_function("k2-family r=3 k=4 m=6", |b| {
        b.iter(|| {
            let engine = fresh_engine("k2-family");
            black_box(engine.materialize_ball(3, 4, 6).expect("within budget"));
        });
    });
    group.bench_function("star-mix r=2 k=3 m=4", |b| {
        b.iter(|| {
            let engine = fresh_engine("star-mix");
            black_box(engine.materialize_ball(2, 3, 4).expect("within budget"));
        });
    });
    group.finish();
}

fn bench_simulator(c: &mut Criterion) {
    let mut group = c.benchmark_group("scheduler run");
    let host = adequate_host(2, 3);
    group.bench_function("adequate host m=2 t=3", |b| {
        b.iter(|| black_box(run(black_box(&host)).expect("valid config")));
    });
    let fuzzed = fuzz_config(7);
    group.bench_function("fuzz seed 7", |b| {
        b.iter(|| black_box(run(black_box(&fuzzed)).expect("valid config")));
    });
    group.finish();
}

criterion_group!(benches, bench_pairing, bench_ball, bench_simulator);
criterion_main!(benches);
