use cohcsp::cohomology::{coh_k_consistency, ZtestOracle};
use cohcsp::corpus::{planted_linear_system, random_digraph, rng};
use cohcsp::equivalence::ck_equiv;
use cohcsp::exec;
use cohcsp::presheaf::{build_base, coflasquify};
use cohcsp::structures::{cycle, disjoint_union, linear_instance, Mode};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, bool); 2] = [("sequential", false), ("parallel", true)];

fn bench_coflasquify(c: &mut Criterion) {
    let mut r = rng(7);
    let a = random_digraph(&mut r, 7, 0.3, false);
    let b = random_digraph(&mut r, 4, 0.6, true);
    let h = build_base(&a, &b, 3, Mode::Hom).unwrap();
    let mut group = c.benchmark_group("coflasquify");
    for (label, on) in MODES {
        exec::set_parallel(on);
        group.bench_function(BenchmarkId::new(label, "7x4 k=3"), |bench| bench.iter(|| coflasquify(black_box(&h))));
    }
    group.finish();
    exec::set_parallel(true);
}

fn bench_cohomology(c: &mut Criterion) {
    let eqs = planted_linear_system(&mut rng(11), 2, 8, 10, 3);
    let (a, t) = linear_instance(2, &eqs).unwrap();
    let b = t.template_structure();
    let sbar = coflasquify(&build_base(&a, &b, 3, Mode::Hom).unwrap());
    let mut group = c.benchmark_group("cohomology");
    group.sample_size(20);
    for (label, on) in MODES {
        exec::set_parallel(on);
        group.bench_function(BenchmarkId::new(label, "ztest oracle"), |bench| {
            bench.iter(|| ZtestOracle::new(black_box(&sbar)).unwrap())
        });
        group.bench_function(BenchmarkId::new(label, "coh k=3"), |bench| {
            bench.iter(|| coh_k_consistency(black_box(&a), black_box(&b), 3, false).unwrap())
        });
    }
    group.finish();
    exec::set_parallel(true);
}

fn bench_counting(c: &mut Criterion) {
    let c6 = cycle(6).unwrap();
    let two_c3 = disjoint_union(&cycle(3).unwrap(), &cycle(3).unwrap()).unwrap();
    let mut group = c.benchmark_group("counting");
    for (label, on) in MODES {
        exec::set_parallel(on);
        group.bench_function(BenchmarkId::new(label, "C6 vs 2C3 k=3"), |bench| {
            bench.iter(|| ck_equiv(black_box(&c6), black_box(&two_c3), 3).unwrap())
        });
    }
    group.finish();
    exec::set_parallel(true);
}

criterion_group!(benches, bench_coflasquify, bench_cohomology, bench_counting);
criterion_main!(benches);
