use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use steinerlab::exact::q_frac;
use steinerlab::harness::suite::{solve, Algo};
use steinerlab::{all_pairs_shortest_paths, SimConfig};
use steinerlab_bench::{fixture, SIZES};

fn algorithms(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let eps = q_frac(1, 2);
    for algo in Algo::ALL {
        let mut group = c.benchmark_group(algo.name());
        group.sample_size(10);
        for n in SIZES {
            let inst = fixture("gnm", n, 1);
            group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
                b.iter(|| solve(inst, algo, &eps, 2, 0, &cfg).expect("bench run"))
            });
        }
        group.finish();
    }
}

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("all-pairs");
    for n in SIZES {
        let inst = fixture("grid", n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| all_pairs_shortest_paths(inst.graph()).expect("connected"))
        });
    }
    group.finish();
}

criterion_group!(benches, algorithms, metrics);
criterion_main!(benches);
