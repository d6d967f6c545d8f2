//! Traces, reachability and enabled-action sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;

use crate::model::{Label, Pqts};

/// Default bound on the number of traces enumerated by [`traces_upto`].
pub const DEFAULT_TRACE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BehaviorError {
    #[error("trace enumeration exceeded the cap of {cap} traces")]
    TraceCapExceeded { cap: usize },
    #[error("complete traces are only defined here for acyclic systems")]
    Cyclic,
}

/// A finite sequence of labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trace(Vec<Label>);

impl Trace {
    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    pub fn new(labels: Vec<Label>) -> Self {
        Trace(labels)
    }

    /// Parses space-separated decorated tokens such as `a? b! delta`.
    pub fn parse(text: &str) -> Option<Self> {
        text.split_whitespace().map(Label::parse_token).collect::<Option<Vec<_>>>().map(Trace)
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn into_labels(self) -> Vec<Label> {
        self.0
    }

    /// This trace extended by one label.
    pub fn then(&self, label: Label) -> Trace {
        let mut v = self.0.clone();
        v.push(label);
        Trace(v)
    }

    pub fn push(&mut self, label: Label) {
        self.0.push(label);
    }

    pub fn prefix(&self, len: usize) -> Trace {
        Trace(self.0[..len].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Trace) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn mirrored(&self) -> Trace {
        Trace(self.0.iter().map(Label::mirrored).collect())
    }

    /// Space-separated tokens; the empty trace yields an empty string.
    pub fn tokens(&self) -> String {
        self.0.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    }
}

impl Deref for Trace {
    type Target = [Label];
    fn deref(&self) -> &[Label] {
        &self.0
    }
}

impl From<Vec<Label>> for Trace {
    fn from(v: Vec<Label>) -> Self {
        Trace(v)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("ε")
        } else {
            f.write_str(&self.tokens())
        }
    }
}

/// One step `(μ, a, s')` of a path: the transition index into the model,
/// the label taken and the target state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathStep {
    pub transition: usize,
    pub label: Label,
    pub target: usize,
}

/// A finite path starting in `start`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    pub start: usize,
    pub steps: Vec<PathStep>,
}

impl Path {
    pub fn new(start: usize) -> Self {
        Path { start, steps: Vec::new() }
    }

    pub fn then(mut self, transition: usize, label: Label, target: usize) -> Self {
        self.steps.push(PathStep { transition, label, target });
        self
    }

    pub fn last(&self) -> usize {
        self.steps.last().map(|s| s.target).unwrap_or(self.start)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn trace(&self) -> Trace {
        Trace(self.steps.iter().map(|s| s.label.clone()).collect())
    }

    /// Checks that each step is a transition of `p` with positive probability.
    pub fn is_valid_in(&self, p: &Pqts) -> bool {
        let mut state = self.start;
        for step in &self.steps {
            let Some(t) = p.transitions().get(step.transition) else { return false };
            if t.source != state {
                return false;
            }
            let ok = t
                .dist
                .outcomes()
                .iter()
                .any(|o| o.label == step.label && o.target == step.target && o.prob > num_traits::Zero::zero());
            if !ok {
                return false;
            }
            state = step.target;
        }
        true
    }
}

/// States reachable from `from` by a path whose trace is `sigma`.
pub fn reach(p: &Pqts, from: &BTreeSet<usize>, sigma: &[Label]) -> BTreeSet<usize> {
    let mut cur = from.clone();
    for label in sigma {
        cur = step(p, &cur, label);
        if cur.is_empty() {
            break;
        }
    }
    cur
}

fn step(p: &Pqts, from: &BTreeSet<usize>, label: &Label) -> BTreeSet<usize> {
    let mut next = BTreeSet::new();
    for &s in from {
        for &t in p.transitions_from(s) {
            for o in p.transition(t).dist.outcomes() {
                if &o.label == label && o.prob > num_traits::Zero::zero() {
                    next.insert(o.target);
                }
            }
        }
    }
    next
}

fn enabled_in(p: &Pqts, states: &BTreeSet<usize>) -> BTreeSet<Label> {
    states.iter().flat_map(|&s| p.enabled(s)).collect()
}

/// Labels enabled in some state reached by `sigma` from the initial state.
pub fn after(p: &Pqts, sigma: &[Label]) -> BTreeSet<Label> {
    enabled_in(p, &reach(p, &BTreeSet::from([p.initial()]), sigma))
}

/// Outputs and quiescence enabled after `sigma`.
pub fn out(p: &Pqts, sigma: &[Label]) -> BTreeSet<Label> {
    after(p, sigma).into_iter().filter(Label::is_observable_output).collect()
}

/// Every trace of length at most `k`, with the default cap.
pub fn traces_upto(p: &Pqts, k: usize) -> Result<BTreeSet<Trace>, BehaviorError> {
    traces_upto_capped(p, k, DEFAULT_TRACE_CAP)
}

pub fn traces_upto_capped(p: &Pqts, k: usize, cap: usize) -> Result<BTreeSet<Trace>, BehaviorError> {
    let mut all = BTreeSet::new();
    all.insert(Trace::empty());
    let mut frontier: BTreeMap<Trace, BTreeSet<usize>> = BTreeMap::new();
    frontier.insert(Trace::empty(), BTreeSet::from([p.initial()]));
    for _ in 0..k {
        let mut next = BTreeMap::new();
        for (sigma, states) in &frontier {
            for label in enabled_in(p, states) {
                let reached = step(p, states, &label);
                let t = sigma.then(label);
                all.insert(t.clone());
                if all.len() > cap {
                    return Err(BehaviorError::TraceCapExceeded { cap });
                }
                next.insert(t, reached);
            }
        }
        frontier = next;
    }
    Ok(all)
}

/// Traces of maximal paths of an acyclic system.
pub fn ctraces(t: &Pqts) -> Result<BTreeSet<Trace>, BehaviorError> {
    if !t.is_acyclic() {
        return Err(BehaviorError::Cyclic);
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![(t.initial(), Trace::empty())];
    while let Some((state, sigma)) = stack.pop() {
        let mut terminal = true;
        for &ti in t.transitions_from(state) {
            for o in t.transition(ti).dist.outcomes() {
                terminal = false;
                stack.push((o.target, sigma.then(o.label.clone())));
            }
        }
        if terminal {
            out.insert(sigma);
        }
    }
    Ok(out)
}
