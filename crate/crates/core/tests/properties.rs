use std::collections::BTreeSet;

use num_traits::Signed;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pqts::behavior::{reach, traces_upto, Trace};
use pqts::convex::{contains, hrep, hull_member, ConstrainedHull, RVector};
use pqts::model::{parse_pqts, Label, Pqts};
use pqts::random::{random_pqts, RandomConfig};
use pqts::rational::{ratio, Rational};
use pqts::sched::{trace_vector, unfold, vertices, Adversary, Choice};
use pqts::stat::{accept, freq, radius, Metric, Method, Sample};
use pqts::testgen::{annotate_trace, compose, generate_tests, run_test, validate_test, Target};

fn model(seed: u64, dirac: bool, input_enabled: bool) -> Pqts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pqts(&mut rng, &RandomConfig { max_states: 4, inputs: 1, outputs: 2, dirac, input_enabled }, "m")
}

fn points(seed: u64, n: usize, d: usize) -> Vec<RVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| RVector::new((0..d).map(|_| ratio(rng.gen_range(-4..=4), rng.gen_range(1..=3))).collect())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip(seed in any::<u64>(), dirac in any::<bool>()) {
        let m = model(seed, dirac, false);
        let back = parse_pqts(&m.to_string()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn reach_distributes_over_union(seed in any::<u64>(), k in 0usize..3) {
        let m = model(seed, false, false);
        let all: BTreeSet<usize> = (0..m.num_states()).collect();
        for t in traces_upto(&m, k).unwrap() {
            let whole = reach(&m, &all, &t);
            let parts: BTreeSet<usize> =
                all.iter().flat_map(|&s| reach(&m, &BTreeSet::from([s]), &t)).collect();
            prop_assert_eq!(whole, parts);
        }
    }

    #[test]
    fn mixtures_are_hull_members(seed in any::<u64>(), n in 1usize..6, d in 1usize..4, w in prop::collection::vec(0i64..5, 6)) {
        let vs = points(seed, n, d);
        let w = &w[..n];
        let sum: i64 = w.iter().sum();
        prop_assume!(sum > 0);
        let x = RVector::new((0..d).map(|j| vs.iter().zip(w).map(|(v, &wi)| &v.coords()[j] * ratio(wi, sum)).sum()).collect());
        let lambda = hull_member(&x, &vs).unwrap().expect("a mixture is a member");
        prop_assert_eq!(lambda.iter().sum::<Rational>(), ratio(1, 1));
        prop_assert!(hrep(&vs).unwrap().contains_point(&x));
    }

    #[test]
    fn hull_contains_its_own_subsets(seed in any::<u64>(), n in 2usize..7, d in 1usize..4) {
        let vs = points(seed, n, d);
        let q = hrep(&vs).unwrap();
        for v in &vs {
            prop_assert!(q.contains_point(v));
        }
        prop_assert!(contains(&ConstrainedHull::hull(vs[..n / 2 + 1].to_vec()), &q).unwrap().is_contained());
    }

    #[test]
    fn trace_vectors_are_well_formed(seed in any::<u64>(), k in 0usize..3) {
        let m = model(seed, false, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let adv = Adversary::from_fn(unfold(&m, k).unwrap(), |t, n| {
            let opts = &t.nodes[n].options;
            if opts.is_empty() || rng.gen_bool(0.2) {
                vec![(Choice::Halt, ratio(1, 1))]
            } else {
                vec![(Choice::Transition(opts[rng.gen_range(0..opts.len())].transition), ratio(1, 1))]
            }
        }).unwrap();
        let h = trace_vector(&adv, &m);
        prop_assert!(h.violations().is_empty(), "{:?}", h.violations());
        prop_assert!(vertices(&m, k, false).unwrap().contains(&h));
    }

    #[test]
    fn generated_tests_are_valid(seed in any::<u64>(), k in 0usize..4) {
        let m = model(seed, false, true);
        let t = generate_tests(&m, k, 1, seed).unwrap().remove(0);
        validate_test(&t.test, &m).unwrap();
        prop_assert!(t.annotation.keys().all(|tr| tr.len() == k));
        for (tr, v) in &t.annotation {
            prop_assert_eq!(*v, annotate_trace(&m, &tr.mirrored()));
        }
    }

    #[test]
    fn composition_projects_to_components(seed in any::<u64>()) {
        let m = model(seed, false, true);
        let t = generate_tests(&m, 2, 1, seed).unwrap().remove(0);
        let c = compose(&m, &t.test).unwrap();
        let init_m = BTreeSet::from([m.initial()]);
        let init_t = BTreeSet::from([t.test.initial()]);
        for tr in traces_upto(&c, 2).unwrap() {
            let in_m: Vec<Label> = tr.iter().map(|l| m.signature().label_named(l.name()).unwrap()).collect();
            prop_assert!(!reach(&m, &init_m, &in_m).is_empty());
            prop_assert!(!reach(&t.test, &init_t, &Trace::new(in_m).mirrored()).is_empty());
        }
    }

    #[test]
    fn own_samples_conform_in_output(seed in any::<u64>()) {
        let m = model(seed, false, true);
        let t = generate_tests(&m, 2, 1, seed).unwrap().remove(0);
        let run = run_test(&t, Target::Simulated(&m), 20, seed).unwrap();
        prop_assert!(run.output_verdict.is_pass());
        prop_assert_eq!(freq(&run.sample).total(), ratio(1, 1));
    }

    #[test]
    fn radius_shrinks_as_alpha_grows(b in 0usize..=30, a1 in 1i64..20, a2 in 1i64..20) {
        let h = pqts::sched::TraceDistVector {
            depth: 1,
            entries: [("", ratio(1, 1)), ("x!", ratio(1, 3)), ("y!", ratio(2, 3))]
                .into_iter().map(|(t, p)| (Trace::parse(t).unwrap(), p)).collect(),
        };
        let (lo, hi) = (ratio(a1.min(a2), 20), ratio(a1.max(a2), 20));
        for metric in [Metric::L2, Metric::Linf] {
            let r_lo = radius(&h, 30, &lo, metric, Method::Exact).unwrap().value.unwrap();
            let r_hi = radius(&h, 30, &hi, metric, Method::Exact).unwrap().value.unwrap();
            prop_assert!(r_hi.comparable() <= r_lo.comparable());
            let mut traces = vec![Trace::parse("x!").unwrap(); b];
            traces.extend(vec![Trace::parse("y!").unwrap(); 30 - b]);
            let o = Sample::new(1, traces).unwrap();
            if accept(&o, &h, &hi, metric, Method::Exact).unwrap() {
                prop_assert!(accept(&o, &h, &lo, metric, Method::Exact).unwrap());
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_with_exact_on_the_coin() {
    let h = pqts::sched::TraceDistVector {
        depth: 1,
        entries: [("", ratio(1, 1)), ("b!", ratio(1, 2)), ("c!", ratio(1, 2))]
            .into_iter()
            .map(|(t, p)| (Trace::parse(t).unwrap(), p))
            .collect(),
    };
    let alpha = ratio(1, 20);
    let exact = radius(&h, 100, &alpha, Metric::Linf, Method::Exact).unwrap().value.unwrap();
    let mc = radius(&h, 100, &alpha, Metric::Linf, Method::MonteCarlo { draws: 4000, seed: 3 }).unwrap();
    assert!(mc.approximate);
    let mc = mc.value.unwrap();
    // Neighbouring achievable radii on the coin are 1/100 apart.
    let gap = (exact.comparable() - mc.comparable()).abs();
    assert!(gap <= ratio(1, 50), "exact {exact}, monte carlo {mc}");
}

#[test]
fn self_acceptance_rate_is_bounded() {
    let spec = parse_pqts(&std::fs::read_to_string(format!("{}/../../models/music_spec.pqts", env!("CARGO_MANIFEST_DIR"))).unwrap()).unwrap();
    let t = generate_tests(&spec, 2, 1, 7).unwrap().remove(0);
    let alpha = ratio(1, 10);
    let experiments = 60;
    let mut rejected = 0;
    for seed in 0..experiments {
        let run = run_test(&t, Target::Simulated(&spec), 50, 1000 + seed).unwrap();
        let v = pqts::stat::statistical_verdict(&run.sample, &spec, &t, &alpha, Metric::L2, Method::Exact).unwrap();
        if !v.verdict.is_pass() {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / experiments as f64;
    let bound = 0.1 + 3.0 * (0.1f64 / experiments as f64).sqrt();
    assert!(rate <= bound, "rejection rate {rate} above {bound}");
}
