//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single `criterion N: PASS|FAIL ...` line (visible with `--nocapture`).

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pqts::behavior::{traces_upto, Path, Trace};
use pqts::conformance::{check_ioco, check_pioco, check_td_inclusion, Witness};
use pqts::convex::{hull_member, RVector};
use pqts::model::{parse_pqts, Label, Pqts};
use pqts::random::{enable_inputs, random_pqts, related, RandomConfig};
use pqts::rational::{ratio, Rational};
use pqts::sched::{path_prob, trace_vector, unfold, vertices, Adversary, Choice, TraceIndex};
use pqts::stat::{accept, combined_verdict, radius, statistical_verdict, Metric, Method};
use pqts::testgen::{generate_tests, run_test, Target, Verdict};

fn model(name: &str) -> Pqts {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_pqts(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn report(n: usize, ok: bool, start: Instant, budget: Duration, detail: String) {
    let elapsed = start.elapsed();
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n}: {status} ({detail}; {:.2}s, budget {}s)", elapsed.as_secs_f64(), budget.as_secs());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn tr(s: &str) -> Trace {
    Trace::parse(s).unwrap()
}

#[test]
fn criterion_01_fig1_adversary() {
    let start = Instant::now();
    let p = model("fig1.pqts");
    let tree = unfold(&p, 2).unwrap();
    let adv = Adversary::from_fn(tree, |t, n| {
        let node = &t.nodes[n];
        if n == 0 {
            vec![(Choice::Transition(0), ratio(1, 2)), (Choice::Transition(1), ratio(1, 2))]
        } else {
            match node.options.as_slice() {
                [only] => vec![(Choice::Transition(only.transition), Rational::one())],
                _ => vec![(Choice::Halt, Rational::one())],
            }
        }
    })
    .unwrap();
    let a = Label::input("a");
    let b = Label::output("b");
    let pi = Path::new(0).then(0, a.clone(), 1).then(3, b.clone(), 5);
    let eta = Path::new(0).then(1, a, 3).then(5, b, 8);
    let pp = path_prob(&p, &adv, &pi).unwrap();
    let pe = path_prob(&p, &adv, &eta).unwrap();
    let h = trace_vector(&adv, &p);
    let ok = pp == ratio(1, 8) && pe == ratio(1, 8) && h.get(&tr("a? b!")) == ratio(1, 4);
    report(1, ok, start, Duration::from_secs(1), format!("P(pi)={pp}, P(eta)={pe}, H(a? b!)={}", h.get(&tr("a? b!"))));
}

#[test]
fn criterion_02_fig2_pioco() {
    let start = Instant::now();
    let b = model("fig2_b.pqts");
    let mut details = Vec::new();
    let mut ok = true;
    for p in ["0", "1_3", "1_2", "1"] {
        let a = model(&format!("fig2_a_{p}.pqts"));
        let pass = check_pioco(&a, &b, 2).unwrap().passed();
        ok &= pass;
        details.push(format!("A({}) pioco B: {pass}", p.replace('_', "/")));
    }
    let v = check_pioco(&b, &model("fig2_a_1_2.pqts"), 2).unwrap();
    let witness_a = match &v.witness {
        Some(Witness::Point { point, .. }) => point.get(&tr("a!")),
        _ => Rational::zero(),
    };
    ok &= !v.passed() && witness_a.is_one();
    details.push(format!("B pioco A(1/2): {}, witness P(a!)={witness_a}", v.passed()));
    report(2, ok, start, Duration::from_secs(5), details.join(", "));
}

fn binomial_coverage(m: u64, lo: u64, hi: u64) -> Rational {
    // Independent oracle: direct binomial summation under Bin(m, 1/2).
    let mut c = BigInt::one();
    let mut total = BigInt::zero();
    for x in 0..=m {
        if x > 0 {
            c = c * BigInt::from(m - x + 1) / BigInt::from(x);
        }
        if (lo..=hi).contains(&x) {
            total += &c;
        }
    }
    Rational::new(total, BigInt::from(2).pow(m as u32))
}

#[test]
fn criterion_03_coin_radius() {
    let start = Instant::now();
    let coin = pqts::sched::TraceDistVector {
        depth: 2,
        entries: [("", ratio(1, 1)), ("a?", ratio(1, 1)), ("a? b!", ratio(1, 2)), ("a? c!", ratio(1, 2))]
            .into_iter()
            .map(|(t, p)| (tr(t), p))
            .collect(),
    };
    let sample = |b: usize| {
        let mut v = vec![tr("a? b!"); b];
        v.extend(vec![tr("a? c!"); 100 - b]);
        pqts::stat::Sample::new(2, v).unwrap()
    };
    let alpha = ratio(1, 20);
    let r = radius(&coin, 100, &alpha, Metric::Linf, Method::Exact).unwrap();
    let r_exact = r.value.as_ref().and_then(|d| d.exact());
    let a42 = accept(&sample(42), &coin, &alpha, Metric::Linf, Method::Exact).unwrap();
    let a38 = accept(&sample(38), &coin, &alpha, Metric::Linf, Method::Exact).unwrap();
    let wide = binomial_coverage(100, 40, 60);
    let narrow = binomial_coverage(100, 41, 59);
    let level = ratio(19, 20);
    let ok = r_exact == Some(ratio(1, 10)) && a42 && !a38 && wide > level && narrow <= level;
    report(
        3,
        ok,
        start,
        Duration::from_secs(10),
        format!(
            "r={}, accept 42/58={a42}, accept 38/62={a38}, P(40..60)={:.5}, P(41..59)={:.5}",
            r,
            pqts::rational::to_f64(&wide),
            pqts::rational::to_f64(&narrow)
        ),
    );
}

#[test]
fn criterion_04_ioco_pioco_agree_on_qts() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec_cfg = RandomConfig { max_states: 6, inputs: 1, outputs: 2, dirac: true, input_enabled: false };
    let (mut agree, mut passes, n) = (0, 0, 200);
    let mut first_bad = None;
    for i in 0..n {
        let spec = random_pqts(&mut rng, &spec_cfg, "s");
        let imp = enable_inputs(&related(&mut rng, &spec, &spec_cfg, "i"));
        let io = check_ioco(&imp, &spec, 3).unwrap().passed();
        let pi = check_pioco(&imp, &spec, 3).unwrap().passed();
        passes += usize::from(io);
        if io == pi {
            agree += 1;
        } else if first_bad.is_none() {
            first_bad = Some(i);
        }
    }
    report(
        4,
        agree == n,
        start,
        Duration::from_secs(120),
        format!("{agree}/{n} pairs agree, {passes} conforming; first disagreement {first_bad:?}"),
    );
}

#[test]
fn criterion_05_td_implies_pioco() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = RandomConfig { max_states: 5, inputs: 1, outputs: 2, dirac: false, input_enabled: true };
    let spec_cfg = RandomConfig { input_enabled: false, ..cfg };
    let (mut td_pass, mut violations, n) = (0, 0, 400);
    for _ in 0..n {
        let spec = random_pqts(&mut rng, &spec_cfg, "s");
        let imp = enable_inputs(&related(&mut rng, &spec, &cfg, "i"));
        let td = check_td_inclusion(&imp, &spec, 2).unwrap().passed();
        td_pass += usize::from(td);
        if td && !check_pioco(&imp, &spec, 2).unwrap().passed() {
            violations += 1;
        }
    }
    report(
        5,
        violations == 0,
        start,
        Duration::from_secs(120),
        format!("{n} pairs, {td_pass} in td inclusion, {violations} of those fail pioco"),
    );
}

#[test]
fn criterion_06_pioco_iff_td_for_input_enabled() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = RandomConfig { max_states: 5, inputs: 1, outputs: 2, dirac: false, input_enabled: true };
    let (mut agree, mut passes, n) = (0, 0, 100);
    let mut first_bad = None;
    for i in 0..n {
        let spec = random_pqts(&mut rng, &cfg, "s");
        let imp = related(&mut rng, &spec, &cfg, "i");
        let td = check_td_inclusion(&imp, &spec, 2).unwrap().passed();
        let pi = check_pioco(&imp, &spec, 2).unwrap().passed();
        passes += usize::from(pi);
        if td == pi {
            agree += 1;
        } else if first_bad.is_none() {
            first_bad = Some(i);
        }
    }
    report(
        6,
        agree == n,
        start,
        Duration::from_secs(120),
        format!("{agree}/{n} pairs agree, {passes} pioco-conforming; first disagreement {first_bad:?}"),
    );
}

#[test]
fn criterion_07_pioco_transitive() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = RandomConfig { max_states: 5, inputs: 1, outputs: 2, dirac: false, input_enabled: true };
    let spec_cfg = RandomConfig { input_enabled: false, ..cfg };
    let (mut chains, mut violations, n) = (0, 0, 200);
    for _ in 0..n {
        let c = random_pqts(&mut rng, &spec_cfg, "c");
        let b = enable_inputs(&related(&mut rng, &c, &cfg, "b"));
        let a = related(&mut rng, &b, &cfg, "a");
        if check_pioco(&a, &b, 2).unwrap().passed() && check_pioco(&b, &c, 2).unwrap().passed() {
            chains += 1;
            if !check_pioco(&a, &c, 2).unwrap().passed() {
                violations += 1;
            }
        }
    }
    report(
        7,
        violations == 0,
        start,
        Duration::from_secs(120),
        format!("{n} triples, {chains} with both premises, {violations} violations"),
    );
}

#[test]
fn criterion_08_music_player() {
    let start = Instant::now();
    let spec = model("music_spec.pqts");
    let t = generate_tests(&spec, 2, 1, 7).unwrap().remove(0);
    let root: Vec<Label> = t.test.transitions_from(0).iter().map(|&i| t.test.transition(i).dist.outcomes()[0].label.clone()).collect();
    let shape = root.contains(&Label::output("shuffle"));

    let i1 = run_test(&t, Target::Simulated(&model("music_impl1.pqts")), 10, 1).unwrap();
    let uniform = model("music_impl2_uniform.pqts");
    let i2 = run_test(&t, Target::Simulated(&uniform), 10, 1).unwrap();

    let alpha = ratio(1, 20);
    let skewed = model("music_impl2_skewed.pqts");
    let mut skew_fails = 0;
    for seed in 0..5 {
        let run = run_test(&t, Target::Simulated(&skewed), 100, seed).unwrap();
        let stat = statistical_verdict(&run.sample, &spec, &t, &alpha, Metric::L2, Method::Exact).unwrap();
        if combined_verdict(run.output_verdict, stat.verdict) == Verdict::Fail {
            skew_fails += 1;
        }
    }
    let uni_run = run_test(&t, Target::Simulated(&uniform), 100, 11).unwrap();
    let uni_stat = statistical_verdict(&uni_run.sample, &spec, &t, &alpha, Metric::L2, Method::Exact).unwrap();

    let ok = shape
        && i1.output_verdict == Verdict::Fail
        && i2.output_verdict == Verdict::Pass
        && skew_fails >= 4
        && uni_stat.verdict == Verdict::Pass;
    report(
        8,
        ok,
        start,
        Duration::from_secs(60),
        format!(
            "root stimulus={shape}, impl1 output={}, impl2 output={}, impl2 uniform statistical={}, skewed combined fail {skew_fails}/5",
            i1.output_verdict, i2.output_verdict, uni_stat.verdict
        ),
    );
}

/// Facets of the hull of `pts` found by trying every hyperplane through `d`
/// of the points. Assumes the points span the whole space.
fn brute_force_facets(pts: &[Vec<Rational>], d: usize) -> Vec<(Vec<Rational>, Rational)> {
    fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            combos(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    // One normal to the rows of `m` (d-1 rows, d columns), if the null space is a line.
    fn normal(mut m: Vec<Vec<Rational>>, d: usize) -> Option<Vec<Rational>> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..d {
            let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
            m.swap(r, p);
            let inv = Rational::one() / m[r][c].clone();
            for x in m[r].iter_mut() {
                *x = &*x * &inv;
            }
            for i in 0..m.len() {
                if i != r && !m[i][c].is_zero() {
                    let f = m[i][c].clone();
                    for j in 0..d {
                        let v = &m[r][j] * &f;
                        m[i][j] -= v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        if pivots.len() != d - 1 {
            return None;
        }
        let free = (0..d).find(|c| !pivots.contains(c))?;
        let mut n = vec![Rational::zero(); d];
        n[free] = Rational::one();
        for (row, &pc) in pivots.iter().enumerate() {
            n[pc] = -m[row][free].clone();
        }
        Some(n)
    }
    let dot = |a: &[Rational], b: &[Rational]| a.iter().zip(b).map(|(x, y)| x * y).sum::<Rational>();
    let mut subsets = Vec::new();
    combos(pts.len(), d, 0, &mut Vec::new(), &mut subsets);
    let mut facets = Vec::new();
    for s in subsets {
        let base = &pts[s[0]];
        let rows: Vec<Vec<Rational>> = s[1..].iter().map(|&i| pts[i].iter().zip(base).map(|(a, b)| a - b).collect()).collect();
        let Some(n) = normal(rows, d) else { continue };
        let off = dot(&n, base);
        let vals: Vec<Rational> = pts.iter().map(|p| dot(&n, p) - &off).collect();
        if vals.iter().all(|v| !v.is_positive()) {
            facets.push((n, off));
        } else if vals.iter().all(|v| !v.is_negative()) {
            facets.push((n.iter().map(|x| -x).collect(), -off));
        }
    }
    facets
}

#[test]
fn criterion_09_hull_membership_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut inside_ok, mut outside_ok, mut total, mut mismatches) = (0, 0, 0, 0);
    let target = 10_000;
    while total < target {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(d + 1..=d + 4);
        let pts: Vec<Vec<Rational>> = (0..n).map(|_| (0..d).map(|_| ratio(rng.gen_range(-6..=6), 2)).collect()).collect();
        let facets = brute_force_facets(&pts, d);
        if facets.is_empty() {
            continue; // degenerate draw, not full-dimensional
        }
        let verts: Vec<RVector> = pts.iter().map(|p| RVector::new(p.clone())).collect();
        for _ in 0..200 {
            total += 1;
            let point: Vec<Rational> = if rng.gen_bool(0.5) {
                // A random mixture of the vertices.
                let w: Vec<i64> = (0..n).map(|_| rng.gen_range(0..5)).collect();
                let sum: i64 = w.iter().sum::<i64>().max(1);
                let w: Vec<Rational> =
                    if w.iter().all(|&x| x == 0) { (0..n).map(|i| ratio(i64::from(i == 0), 1)).collect() } else { w.iter().map(|&x| ratio(x, sum)).collect() };
                (0..d).map(|j| pts.iter().zip(&w).map(|(p, wi)| &p[j] * wi).sum()).collect()
            } else {
                (0..d).map(|_| ratio(rng.gen_range(-16..=16), 4)).collect()
            };
            let outside = facets.iter().any(|(nrm, off)| nrm.iter().zip(&point).map(|(a, b)| a * b).sum::<Rational>() > *off);
            let member = hull_member(&RVector::new(point), &verts).unwrap().is_some();
            match (outside, member) {
                (false, true) => inside_ok += 1,
                (true, false) => outside_ok += 1,
                _ => mismatches += 1,
            }
            if total >= target {
                break;
            }
        }
    }
    report(
        9,
        mismatches == 0,
        start,
        Duration::from_secs(60),
        format!("{total} points, {inside_ok} inside accepted, {outside_ok} outside rejected, {mismatches} mismatches"),
    );
}

#[test]
fn criterion_10_mixture_property() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = RandomConfig { max_states: 5, inputs: 1, outputs: 2, dirac: false, input_enabled: false };
    let (mut inside, n) = (0, 100);
    for _ in 0..n {
        let p = random_pqts(&mut rng, &cfg, "p");
        let k = rng.gen_range(0..=2);
        let adv = Adversary::from_fn(unfold(&p, k).unwrap(), |t, node| {
            let mut w: Vec<(Choice, i64)> = vec![(Choice::Halt, rng.gen_range(0..3))];
            w.extend(t.nodes[node].options.iter().map(|o| (Choice::Transition(o.transition), rng.gen_range(0..3))));
            let sum: i64 = w.iter().map(|(_, x)| x).sum();
            if sum == 0 {
                return vec![(Choice::Halt, Rational::one())];
            }
            w.into_iter().map(|(c, x)| (c, ratio(x, sum))).collect()
        })
        .unwrap();
        let h = trace_vector(&adv, &p);
        let index = TraceIndex::new(traces_upto(&p, k).unwrap());
        let verts: Vec<RVector> = vertices(&p, k, false).unwrap().iter().map(|v| index.embed(v)).collect();
        if hull_member(&index.embed(&h), &verts).unwrap().is_some() {
            inside += 1;
        }
    }
    report(10, inside == n, start, Duration::from_secs(60), format!("{inside}/{n} randomized adversaries inside the vertex hull"));
}
