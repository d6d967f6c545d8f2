//! Seeded random models, used by property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Distribution, Label, Outcome, Pqts, Signature, Transition};
use crate::rational::{ratio, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomConfig {
    pub max_states: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Only Dirac distributions.
    pub dirac: bool,
    pub input_enabled: bool,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig { max_states: 5, inputs: 1, outputs: 2, dirac: false, input_enabled: true }
    }
}

const INPUTS: [&str; 3] = ["a", "b", "c"];
const OUTPUTS: [&str; 3] = ["x", "y", "z"];

pub fn signature(cfg: &RandomConfig) -> Signature {
    Signature::new(&INPUTS[..cfg.inputs], &OUTPUTS[..cfg.outputs])
}

fn split(rng: &mut impl Rng, labels: &[Label], n: usize, dirac: bool) -> Distribution {
    let mut targets: Vec<(Label, usize)> = Vec::new();
    let outcomes = if dirac { 1 } else { rng.gen_range(1..=2) };
    while targets.len() < outcomes {
        let pick = (labels.choose(rng).expect("labels").clone(), rng.gen_range(0..n));
        if !targets.contains(&pick) {
            targets.push(pick);
        }
        if labels.len() * n == 1 {
            break;
        }
    }
    if targets.len() == 1 {
        let (label, target) = targets.remove(0);
        return Distribution::dirac(label, target);
    }
    let den = rng.gen_range(2..=4);
    let p: Rational = ratio(rng.gen_range(1..den), den);
    let q = Rational::from_integer(1.into()) - &p;
    let mut it = targets.into_iter();
    let (l0, t0) = it.next().expect("two outcomes");
    let (l1, t1) = it.next().expect("two outcomes");
    Distribution::new(vec![Outcome { label: l0, target: t0, prob: p }, Outcome { label: l1, target: t1, prob: q }])
}

/// A random model over [`signature`]. Quiescent states carry a delta self-loop.
pub fn random_pqts(rng: &mut impl Rng, cfg: &RandomConfig, name: &str) -> Pqts {
    let n = rng.gen_range(1..=cfg.max_states.max(1));
    let sig = signature(cfg);
    let outputs: Vec<Label> = sig.outputs().collect();
    let mut transitions = Vec::new();
    for s in 0..n {
        for input in sig.inputs() {
            let count = if cfg.input_enabled { rng.gen_range(1..=2) } else { rng.gen_range(0..=2) };
            for _ in 0..count {
                transitions.push(Transition { source: s, dist: split(rng, std::slice::from_ref(&input), n, cfg.dirac) });
            }
        }
        let generative = if outputs.is_empty() { 0 } else { rng.gen_range(0..=2) };
        for _ in 0..generative {
            transitions.push(Transition { source: s, dist: split(rng, &outputs, n, cfg.dirac) });
        }
        if generative == 0 {
            transitions.push(Transition { source: s, dist: Distribution::dirac(Label::delta(), s) });
        }
    }
    let mut m = Pqts::new(name, (0..n).map(|i| format!("s{i}")).collect(), 0, sig, transitions);
    dedup(&mut m);
    m
}

fn dedup(m: &mut Pqts) {
    let mut seen: Vec<(usize, Distribution)> = Vec::new();
    let kept: Vec<Transition> = m
        .transitions()
        .iter()
        .filter(|t| {
            let key = (t.source, t.dist.clone());
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        })
        .cloned()
        .collect();
    *m = Pqts::new(m.name(), m.states().to_vec(), m.initial(), m.signature().clone(), kept);
}

/// A small random edit of `m` that keeps it well formed and, when `m` is,
/// input enabled.
pub fn mutate(rng: &mut impl Rng, m: &Pqts, cfg: &RandomConfig) -> Pqts {
    let n = m.num_states();
    let mut ts: Vec<Transition> = m.transitions().to_vec();
    let outputs: Vec<Label> = m.signature().outputs().collect();
    match rng.gen_range(0..5) {
        // Keep as is.
        0 => {}
        // Redirect one outcome.
        1 => {
            let t = ts.choose_mut(rng).expect("transitions");
            let mut outcomes = t.dist.outcomes().to_vec();
            let i = rng.gen_range(0..outcomes.len());
            if !outcomes[i].label.is_delta() {
                outcomes[i].target = rng.gen_range(0..n);
                if outcomes.iter().filter(|o| o.label == outcomes[i].label && o.target == outcomes[i].target).count() == 1 {
                    t.dist = Distribution::new(outcomes);
                }
            }
        }
        // Drop an output distribution.
        2 => {
            let gen: Vec<usize> = (0..ts.len()).filter(|&i| !ts[i].dist.has_input() && !is_delta(&ts[i])).collect();
            if let Some(&i) = gen.choose(rng) {
                let s = ts[i].source;
                ts.remove(i);
                if !ts.iter().any(|t| t.source == s && !t.dist.has_input()) {
                    ts.push(Transition { source: s, dist: Distribution::dirac(Label::delta(), s) });
                }
            }
        }
        // Add an output distribution.
        3 if !outputs.is_empty() => {
            let s = rng.gen_range(0..n);
            ts.retain(|t| !(t.source == s && is_delta(t)));
            ts.push(Transition { source: s, dist: split(rng, &outputs, n, cfg.dirac) });
        }
        // Reweight a two-outcome distribution.
        _ => {
            if let Some(t) = ts.iter_mut().filter(|t| t.dist.outcomes().len() == 2).collect::<Vec<_>>().choose_mut(rng) {
                let mut outcomes = t.dist.outcomes().to_vec();
                let den = rng.gen_range(2..=4);
                outcomes[0].prob = ratio(rng.gen_range(1..den), den);
                outcomes[1].prob = Rational::from_integer(1.into()) - &outcomes[0].prob;
                t.dist = Distribution::new(outcomes);
            }
        }
    }
    let mut out = Pqts::new(format!("{}'", m.name()), m.states().to_vec(), m.initial(), m.signature().clone(), ts);
    dedup(&mut out);
    out
}

fn is_delta(t: &Transition) -> bool {
    t.dist.outcomes().iter().all(|o| o.label.is_delta())
}

/// Adds an input self-loop wherever an input is missing.
pub fn enable_inputs(m: &Pqts) -> Pqts {
    let mut ts = m.transitions().to_vec();
    for s in 0..m.num_states() {
        let enabled = m.enabled(s);
        for a in m.signature().inputs().filter(|a| !enabled.contains(a)) {
            ts.push(Transition { source: s, dist: Distribution::dirac(a, s) });
        }
    }
    Pqts::new(m.name(), m.states().to_vec(), m.initial(), m.signature().clone(), ts)
}

/// Either a mutant of `base` or an unrelated model, with equal odds.
pub fn related(rng: &mut impl Rng, base: &Pqts, cfg: &RandomConfig, name: &str) -> Pqts {
    if rng.gen_bool(0.5) {
        mutate(rng, base, cfg).with_name(name)
    } else {
        random_pqts(rng, cfg, name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dirac in [true, false] {
            for input_enabled in [true, false] {
                let cfg = RandomConfig { dirac, input_enabled, ..Default::default() };
                for _ in 0..200 {
                    let m = random_pqts(&mut rng, &cfg, "m");
                    assert!(m.validate().is_empty(), "{m}");
                    if dirac {
                        assert!(m.is_qts());
                    }
                    if input_enabled {
                        assert!(m.is_input_enabled());
                    }
                    let k = mutate(&mut rng, &m, &cfg);
                    assert!(k.validate().is_empty(), "{k}");
                    if input_enabled {
                        assert!(k.is_input_enabled());
                    }
                    assert!(enable_inputs(&k).is_input_enabled());
                }
            }
        }
    }
}
