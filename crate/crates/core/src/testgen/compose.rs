use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::Zero;

use super::TestgenError;
use crate::model::{Distribution, Label, Outcome, Pqts, Signature, Transition};
use crate::rational::Rational;

/// True iff the two systems share no output action besides quiescence.
pub fn compatible(a: &Pqts, b: &Pqts) -> bool {
    shared_output(a, b).is_none()
}

fn shared_output(a: &Pqts, b: &Pqts) -> Option<String> {
    let bo: Vec<&str> = b.signature().output_names().collect();
    a.signature().output_names().find(|n| bo.contains(n)).map(str::to_string)
}

fn has_name(p: &Pqts, name: &str) -> bool {
    p.signature().label_named(name).is_some()
}

/// Parallel composition restricted to the reachable product states. States
/// are named `s|t`.
pub fn compose(a: &Pqts, b: &Pqts) -> Result<Pqts, TestgenError> {
    compose_with_pairs(a, b).map(|(p, _)| p)
}

/// Like [`compose`], also returning the component states of every product state.
pub fn compose_with_pairs(a: &Pqts, b: &Pqts) -> Result<(Pqts, Vec<(usize, usize)>), TestgenError> {
    if let Some(n) = shared_output(a, b) {
        return Err(TestgenError::Incompatible(n));
    }
    let outputs: Vec<&str> = a.signature().output_names().chain(b.signature().output_names()).collect();
    let inputs: Vec<&str> = a
        .signature()
        .input_names()
        .chain(b.signature().input_names())
        .filter(|n| !outputs.contains(n))
        .collect();
    let sig = Signature::new(inputs, outputs);
    let relabel = |l: &Label| sig.label_named(l.name()).expect("label of a component");

    let mut pairs = vec![(a.initial(), b.initial())];
    let mut index: HashMap<(usize, usize), usize> = HashMap::from([((a.initial(), b.initial()), 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut transitions = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (s, t) = pairs[i];
        let mut dists = driven(a, s, b, t, true);
        dists.extend(driven(b, t, a, s, false).into_iter().map(|d| {
            d.into_iter().map(|(l, (y, x), p)| (l, (x, y), p)).collect()
        }));
        for d in dists {
            let mut merged: BTreeMap<(Label, (usize, usize)), Rational> = BTreeMap::new();
            for (l, target, p) in d {
                *merged.entry((relabel(&l), target)).or_insert_with(Rational::zero) += p;
            }
            let mut outcomes = Vec::new();
            for ((label, pair), prob) in merged {
                let j = *index.entry(pair).or_insert_with(|| {
                    pairs.push(pair);
                    queue.push_back(pairs.len() - 1);
                    pairs.len() - 1
                });
                outcomes.push(Outcome { label, target: j, prob });
            }
            transitions.push(Transition { source: i, dist: Distribution::new(outcomes) });
        }
    }
    let names = pairs.iter().map(|&(s, t)| format!("{}|{}", a.state_name(s), b.state_name(t))).collect();
    let name = format!("{}|{}", a.name(), b.name());
    Ok((Pqts::new(name, names, 0, sig, transitions), pairs))
}

type Composed = Vec<(Label, (usize, usize), Rational)>;

/// Distributions of the product at `(sx, sy)` driven by `x`, with `y`
/// reacting on shared actions. Pairs are returned as `(x state, y state)`.
fn driven(x: &Pqts, sx: usize, y: &Pqts, sy: usize, x_first: bool) -> Vec<Composed> {
    let reactions = |label: &Label| -> Vec<&Distribution> {
        y.transitions_from(sy)
            .iter()
            .map(|&i| &y.transition(i).dist)
            .filter(|d| d.outcomes().iter().all(|o| o.label.name() == label.name()))
            .collect()
    };
    let mut out = Vec::new();
    for &ti in x.transitions_from(sx) {
        let mu = &x.transition(ti).dist;
        let labels: Vec<&Label> = mu.labels().into_iter().collect();
        if mu.has_input() {
            let name = labels[0].name();
            if has_name(y, name) {
                // An input shared with an output of y is driven by y; one
                // shared by two inputs is driven from the first component.
                let y_input = y.signature().label_named(name).is_some_and(|l| l.is_input());
                if !(y_input && x_first) {
                    continue;
                }
            }
        } else if !x_first && labels.iter().all(|l| l.is_delta()) {
            // Joint quiescence is already produced when the first component drives.
            continue;
        }
        let needing: Vec<&Label> =
            labels.iter().copied().filter(|l| l.is_delta() || has_name(y, l.name())).collect();
        let options: Vec<Vec<&Distribution>> = needing.iter().map(|l| reactions(l)).collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        let mut choice = vec![0usize; needing.len()];
        loop {
            let mut d = Composed::new();
            for o in mu.outcomes() {
                match needing.iter().position(|l| **l == o.label) {
                    Some(k) => {
                        for r in options[k][choice[k]].outcomes() {
                            d.push((o.label.clone(), (o.target, r.target), &o.prob * &r.prob));
                        }
                    }
                    None => d.push((o.label.clone(), (o.target, sy), o.prob.clone())),
                }
            }
            out.push(d);
            // Advance the mixed-radix counter over reaction choices.
            let mut k = 0;
            while k < choice.len() {
                choice[k] += 1;
                if choice[k] < options[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == choice.len() {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_pqts;
    use crate::rational::ratio;

    #[test]
    fn dirac_sync() {
        let a = parse_pqts("pqts a\ninputs:\noutputs: go!\nstates: a0 init, a1\ntrans a0: { go! 1 -> a1 }\n").unwrap();
        let b = parse_pqts("pqts b\ninputs: go?\noutputs:\nstates: b0 init, b1\ntrans b0: { go? 1 -> b1 }\n").unwrap();
        let c = compose(&a, &b).unwrap();
        assert_eq!(c.states(), &["a0|b0".to_string(), "a1|b1".to_string()]);
        assert!(c.transition(0).dist.is_dirac());
        assert!(c.validate().is_empty());
    }

    #[test]
    fn observer_keeps_output_probabilities() {
        let a = parse_pqts(
            "pqts a\ninputs:\noutputs: b!, c!\nstates: s0 init, s1, s2\ntrans s0: { b! 1/2 -> s1, c! 1/2 -> s2 }\n",
        )
        .unwrap();
        let t = parse_pqts(
            "pqts t\ninputs: b?, c?\noutputs:\nstates: t0 init, t1, t2, t3\n\
             trans t0: { b? 1 -> t1 }\ntrans t0: { c? 1 -> t2 }\ntrans t0: { delta 1 -> t3 }\n",
        )
        .unwrap();
        let c = compose(&a, &t).unwrap();
        assert_eq!(c.transitions().len(), 1);
        let d = &c.transition(0).dist;
        assert_eq!(d.mass_of(&Label::output("b")), ratio(1, 2));
        assert_eq!(d.mass_of(&Label::output("c")), ratio(1, 2));
    }

    #[test]
    fn joint_quiescence_counted_once() {
        let q = parse_pqts("pqts q\ninputs:\noutputs:\nstates: s init\ntrans s: { delta 1 -> s }\n").unwrap();
        let r = parse_pqts("pqts r\ninputs:\noutputs:\nstates: t init\ntrans t: { delta 1 -> t }\n").unwrap();
        let c = compose(&q, &r).unwrap();
        assert_eq!(c.transitions().len(), 1);
    }

    #[test]
    fn incompatible_rejected() {
        let a = parse_pqts("pqts a\ninputs:\noutputs: go!\nstates: a0 init\n").unwrap();
        assert!(!compatible(&a, &a));
        assert_eq!(compose(&a, &a), Err(TestgenError::Incompatible("go".into())));
    }
}
