use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{annotate, AnnotatedTest, TestgenError};
use crate::behavior::reach;
use crate::model::{Distribution, Label, Pqts, Transition};
use crate::seed::derive_seed;

const TAG: &str = "tests";

/// Generates `count` depth-uniform tests for `spec`. At every inner node a
/// coin decides whether to offer a stimulus; if so, it is drawn uniformly
/// from the inputs the specification enables after the node's trace.
pub fn generate_tests(spec: &Pqts, depth: usize, count: usize, seed: u64) -> Result<Vec<AnnotatedTest>, TestgenError> {
    if spec.transitions().is_empty() {
        return Err(TestgenError::NoTransitions);
    }
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG, i as u64));
            let t = build(spec, depth, &mut rng, format!("{}_test{i}", spec.name()));
            annotate(spec, &t)
        })
        .collect()
}

fn build(spec: &Pqts, depth: usize, rng: &mut ChaCha8Rng, name: String) -> Pqts {
    let sig = spec.signature().mirrored();
    let observations: Vec<Label> = spec.signature().outputs_with_delta().collect();
    let mut states = vec!["t0".to_string()];
    let mut transitions = Vec::new();
    // (test state, depth, reachable spec states)
    let mut queue = VecDeque::from([(0usize, 0usize, BTreeSet::from([spec.initial()]))]);
    while let Some((node, d, reached)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        let enabled: Vec<Label> = reached
            .iter()
            .flat_map(|&s| spec.enabled(s))
            .filter(Label::is_input)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        // A stimulus on the last level would never be followed by an observation.
        let stimulus = if d + 1 < depth && !enabled.is_empty() && rng.gen_bool(0.5) {
            Some(enabled[rng.gen_range(0..enabled.len())].clone())
        } else {
            None
        };
        for spec_label in stimulus.into_iter().chain(observations.iter().cloned()) {
            let child = states.len();
            states.push(format!("t{child}"));
            transitions.push(Transition { source: node, dist: Distribution::dirac(spec_label.mirrored(), child) });
            let next = reach(spec, &reached, std::slice::from_ref(&spec_label));
            queue.push_back((child, d + 1, next));
        }
    }
    Pqts::new(name, states, 0, sig, transitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_pqts;
    use crate::testgen::validate_test;

    fn spec() -> Pqts {
        parse_pqts(
            "pqts s\ninputs: go?, stop?\noutputs: x!\nstates: s0 init, s1\n\
             trans s0: { go? 1 -> s1 }\ntrans s0: { stop? 1 -> s0 }\ntrans s0: { delta 1 -> s0 }\n\
             trans s1: { x! 1 -> s0 }\ntrans s1: { go? 1 -> s1 }\n",
        )
        .unwrap()
    }

    #[test]
    fn structure_and_determinism() {
        let a = generate_tests(&spec(), 3, 5, 11).unwrap();
        let b = generate_tests(&spec(), 3, 5, 11).unwrap();
        assert_eq!(a, b);
        for t in &a {
            validate_test(&t.test, &spec()).unwrap();
            assert!(t.annotation.keys().all(|tr| tr.len() == 3));
        }
    }

    #[test]
    fn depth_zero() {
        let t = generate_tests(&spec(), 0, 1, 0).unwrap().remove(0);
        assert_eq!(t.annotation.len(), 1);
        assert!(t.annotation.values().all(|v| v.is_pass()));
    }

    #[test]
    fn empty_spec_rejected() {
        let p = parse_pqts("pqts e\ninputs:\noutputs:\nstates: s init\n").unwrap();
        assert_eq!(generate_tests(&p, 1, 1, 0), Err(TestgenError::NoTransitions));
    }
}
