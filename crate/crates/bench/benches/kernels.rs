use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pqts::convex::{hrep, hull_member, RVector};
use pqts::rational::ratio;
use pqts::sched::vertices;
use pqts::stat::{radius, Metric, Method};
use pqts::testgen::{generate_tests, run_test, Target};
use pqts::{check_pioco, Trace, TraceDistVector};
use pqts_bench::model;

fn points(seed: u64, n: usize, d: usize) -> Vec<RVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| RVector::new((0..d).map(|_| ratio(rng.gen_range(-8..=8), rng.gen_range(1..=4))).collect())).collect()
}

fn convex(c: &mut Criterion) {
    let vs = points(1, 12, 4);
    let x = RVector::new(vec![ratio(0, 1); 4]);
    c.bench_function("hull_member 12 points in 4d", |b| b.iter(|| hull_member(black_box(&x), black_box(&vs)).unwrap()));
    c.bench_function("hrep 12 points in 4d", |b| b.iter(|| hrep(black_box(&vs)).unwrap()));
}

fn conformance(c: &mut Criterion) {
    let fig1 = model("fig1.pqts");
    c.bench_function("vertices fig1 depth 2", |b| b.iter(|| vertices(black_box(&fig1), 2, false).unwrap()));
    let spec = model("music_spec.pqts");
    let imp = model("music_impl2_skewed.pqts");
    c.bench_function("pioco music depth 3", |b| b.iter(|| check_pioco(black_box(&imp), black_box(&spec), 3).unwrap()));
}

fn statistics(c: &mut Criterion) {
    let coin = TraceDistVector {
        depth: 1,
        entries: [("", ratio(1, 1)), ("b!", ratio(1, 2)), ("c!", ratio(1, 2))]
            .into_iter()
            .map(|(t, p)| (Trace::parse(t).unwrap(), p))
            .collect(),
    };
    let three = TraceDistVector {
        depth: 1,
        entries: [("", ratio(1, 1)), ("x!", ratio(1, 6)), ("y!", ratio(1, 3)), ("z!", ratio(1, 2))]
            .into_iter()
            .map(|(t, p)| (Trace::parse(t).unwrap(), p))
            .collect(),
    };
    // Distinct alphas per iteration would hit the cache anyway; this measures the cached path after the first call.
    c.bench_function("radius coin m=100", |b| b.iter(|| radius(&coin, 100, &ratio(1, 20), Metric::Linf, Method::Exact).unwrap()));
    c.bench_function("radius monte carlo 3 traces m=200", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            radius(&three, 200, &ratio(1, 20), Metric::L2, Method::MonteCarlo { draws: 200, seed }).unwrap()
        })
    });
    let spec = model("music_spec.pqts");
    let t = generate_tests(&spec, 2, 1, 7).unwrap().remove(0);
    c.bench_function("simulate 100 runs music", |b| b.iter(|| run_test(&t, Target::Simulated(&spec), 100, 1).unwrap()));
}

criterion_group!(benches, convex, conformance, statistics);
criterion_main!(benches);
