//! Probabilistic quiescent transition systems (pQTS).
//!
//! A model consists of states, an initial state, an action signature and a
//! list of transitions. Each transition pairs a source state with a discrete
//! distribution over `(label, target)` pairs. Inputs are reactive: a
//! distribution that mentions an input mentions no other label. Outputs are
//! generative: one distribution may race several outputs, quiescence
//! included. All probabilities are exact rationals.

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::rational::{is_probability, Rational};

pub use parse::{parse_pqts, parse_pqts_unchecked, ParseError};
pub(crate) use parse::{parse_document, DocumentKind};

/// Reserved name of the quiescence label.
pub const DELTA: &str = "delta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelKind {
    Input,
    Output,
    Quiescence,
}

/// An action label. Two labels are the same action when their names match;
/// the kind records which side of the signature the name sits on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    name: Arc<str>,
    kind: LabelKind,
}

impl Label {
    pub fn input(name: &str) -> Self {
        Label { name: name.into(), kind: LabelKind::Input }
    }

    pub fn output(name: &str) -> Self {
        Label { name: name.into(), kind: LabelKind::Output }
    }

    pub fn delta() -> Self {
        Label { name: DELTA.into(), kind: LabelKind::Quiescence }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn is_input(&self) -> bool {
        self.kind == LabelKind::Input
    }

    pub fn is_output(&self) -> bool {
        self.kind == LabelKind::Output
    }

    pub fn is_delta(&self) -> bool {
        self.kind == LabelKind::Quiescence
    }

    /// True for real outputs and quiescence.
    pub fn is_observable_output(&self) -> bool {
        !self.is_input()
    }

    /// Swaps input and output; quiescence is its own mirror.
    pub fn mirrored(&self) -> Self {
        let kind = match self.kind {
            LabelKind::Input => LabelKind::Output,
            LabelKind::Output => LabelKind::Input,
            LabelKind::Quiescence => LabelKind::Quiescence,
        };
        Label { name: self.name.clone(), kind }
    }

    /// Parses a decorated token: `a?`, `b!` or `delta`.
    pub fn parse_token(token: &str) -> Option<Self> {
        if token == DELTA {
            return Some(Label::delta());
        }
        let (name, kind) = if let Some(name) = token.strip_suffix('?') {
            (name, LabelKind::Input)
        } else if let Some(name) = token.strip_suffix('!') {
            (name, LabelKind::Output)
        } else {
            return None;
        };
        if !is_identifier(name) || name == DELTA {
            return None;
        }
        Some(Label { name: name.into(), kind })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LabelKind::Input => write!(f, "{}?", self.name),
            LabelKind::Output => write!(f, "{}!", self.name),
            LabelKind::Quiescence => f.write_str(DELTA),
        }
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, ',' | ':' | '{' | '}' | '#' | '=' | '?' | '!'))
}

/// Input and output label names. Quiescence is implicit and never listed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    inputs: BTreeSet<Arc<str>>,
    outputs: BTreeSet<Arc<str>>,
}

impl Signature {
    pub fn new<I, O, S, T>(inputs: I, outputs: O) -> Self
    where
        I: IntoIterator<Item = S>,
        O: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        Signature {
            inputs: inputs.into_iter().map(|s| Arc::from(s.as_ref())).collect(),
            outputs: outputs.into_iter().map(|s| Arc::from(s.as_ref())).collect(),
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = Label> + '_ {
        self.inputs.iter().map(|n| Label { name: n.clone(), kind: LabelKind::Input })
    }

    pub fn outputs(&self) -> impl Iterator<Item = Label> + '_ {
        self.outputs.iter().map(|n| Label { name: n.clone(), kind: LabelKind::Output })
    }

    /// Real outputs followed by quiescence.
    pub fn outputs_with_delta(&self) -> impl Iterator<Item = Label> + '_ {
        self.outputs().chain(std::iter::once(Label::delta()))
    }

    /// Every label of the signature, quiescence included, in canonical order.
    pub fn labels(&self) -> Vec<Label> {
        let mut all: Vec<Label> = self.inputs().chain(self.outputs_with_delta()).collect();
        all.sort();
        all
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|s| &**s)
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|s| &**s)
    }

    pub fn contains(&self, label: &Label) -> bool {
        match label.kind {
            LabelKind::Input => self.inputs.contains(&label.name),
            LabelKind::Output => self.outputs.contains(&label.name),
            LabelKind::Quiescence => &*label.name == DELTA,
        }
    }

    /// Looks up a bare action name and returns it with this signature's decoration.
    pub fn label_named(&self, name: &str) -> Option<Label> {
        if name == DELTA {
            Some(Label::delta())
        } else if let Some(n) = self.inputs.get(name) {
            Some(Label { name: n.clone(), kind: LabelKind::Input })
        } else {
            self.outputs.get(name).map(|n| Label { name: n.clone(), kind: LabelKind::Output })
        }
    }

    /// Inputs become outputs and vice versa.
    pub fn mirrored(&self) -> Self {
        Signature { inputs: self.outputs.clone(), outputs: self.inputs.clone() }
    }

    pub(crate) fn insert(&mut self, label: &Label) {
        match label.kind {
            LabelKind::Input => {
                self.inputs.insert(label.name.clone());
            }
            LabelKind::Output => {
                self.outputs.insert(label.name.clone());
            }
            LabelKind::Quiescence => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub label: Label,
    pub target: usize,
    pub prob: Rational,
}

/// A discrete distribution over `(label, target)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distribution {
    outcomes: Vec<Outcome>,
}

impl Distribution {
    pub fn new(outcomes: Vec<Outcome>) -> Self {
        Distribution { outcomes }
    }

    pub fn dirac(label: Label, target: usize) -> Self {
        Distribution::new(vec![Outcome { label, target, prob: Rational::one() }])
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn total(&self) -> Rational {
        self.outcomes.iter().map(|o| &o.prob).sum()
    }

    pub fn labels(&self) -> BTreeSet<&Label> {
        self.outcomes.iter().map(|o| &o.label).collect()
    }

    pub fn has_input(&self) -> bool {
        self.outcomes.iter().any(|o| o.label.is_input())
    }

    pub fn is_dirac(&self) -> bool {
        self.outcomes.len() == 1 && self.outcomes[0].prob.is_one()
    }

    /// Probability mass the distribution assigns to `label`, summed over targets.
    pub fn mass_of(&self, label: &Label) -> Rational {
        self.outcomes.iter().filter(|o| &o.label == label).map(|o| &o.prob).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: usize,
    pub dist: Distribution,
}

/// A structural problem found by [`Pqts::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    InitialOutOfRange { initial: usize },
    DuplicateState { state: String },
    SignatureOverlap { name: String },
    ReservedLabel { name: String },
    UnknownSource { transition: usize, source: usize },
    EmptyDistribution { transition: usize },
    UnknownState { transition: usize, target: usize },
    UnknownLabel { transition: usize, label: Label },
    ProbabilityOutOfRange { transition: usize, label: Label, prob: Rational },
    DuplicateOutcome { transition: usize, label: Label, target: usize },
    MassNotOne { transition: usize, total: Rational },
    InputReactivity { transition: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InitialOutOfRange { initial } => {
                write!(f, "initial state index {initial} is not a declared state")
            }
            Violation::DuplicateState { state } => write!(f, "state `{state}` declared twice"),
            Violation::SignatureOverlap { name } => {
                write!(f, "`{name}` is declared both as input and as output")
            }
            Violation::ReservedLabel { name } => {
                write!(f, "`{name}` is reserved for quiescence and cannot be declared")
            }
            Violation::UnknownSource { transition, source } => {
                write!(f, "transition #{transition}: unknown source state index {source}")
            }
            Violation::EmptyDistribution { transition } => {
                write!(f, "transition #{transition}: empty distribution")
            }
            Violation::UnknownState { transition, target } => {
                write!(f, "transition #{transition}: unknown state index {target}")
            }
            Violation::UnknownLabel { transition, label } => {
                write!(f, "transition #{transition}: label {label} is not in the signature")
            }
            Violation::ProbabilityOutOfRange { transition, label, prob } => {
                write!(f, "transition #{transition}: probability {prob} of {label} is outside (0,1]")
            }
            Violation::DuplicateOutcome { transition, label, target } => {
                write!(f, "transition #{transition}: outcome ({label}, state {target}) listed twice")
            }
            Violation::MassNotOne { transition, total } => {
                write!(f, "transition #{transition}: mass {total} != 1")
            }
            Violation::InputReactivity { transition } => write!(
                f,
                "transition #{transition}: an input shares its distribution with another label"
            ),
        }
    }
}

/// A probabilistic quiescent transition system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pqts {
    name: String,
    states: Vec<String>,
    initial: usize,
    signature: Signature,
    transitions: Vec<Transition>,
    by_state: Vec<Vec<usize>>,
}

impl Pqts {
    /// Builds a model without checking it; see [`Pqts::validate`].
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        initial: usize,
        signature: Signature,
        transitions: Vec<Transition>,
    ) -> Self {
        let mut by_state = vec![Vec::new(); states.len()];
        for (i, t) in transitions.iter().enumerate() {
            if let Some(list) = by_state.get_mut(t.source) {
                list.push(i);
            }
        }
        Pqts { name: name.into(), states, initial, signature, transitions, by_state }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.states[state]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, index: usize) -> &Transition {
        &self.transitions[index]
    }

    /// Indices of the transitions leaving `state`, in declaration order.
    pub fn transitions_from(&self, state: usize) -> &[usize] {
        self.by_state.get(state).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Labels enabled in `state`.
    pub fn enabled(&self, state: usize) -> BTreeSet<Label> {
        self.transitions_from(state)
            .iter()
            .flat_map(|&t| self.transitions[t].dist.outcomes.iter())
            .filter(|o| !o.prob.is_zero())
            .map(|o| o.label.clone())
            .collect()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Reports every structural invariant violation. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.initial >= self.states.len() {
            out.push(Violation::InitialOutOfRange { initial: self.initial });
        }
        let mut seen = BTreeSet::new();
        for s in &self.states {
            if !seen.insert(s.as_str()) {
                out.push(Violation::DuplicateState { state: s.clone() });
            }
        }
        for name in self.signature.inputs.intersection(&self.signature.outputs) {
            out.push(Violation::SignatureOverlap { name: name.to_string() });
        }
        for name in self.signature.inputs.iter().chain(&self.signature.outputs) {
            if &**name == DELTA {
                out.push(Violation::ReservedLabel { name: name.to_string() });
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if t.source >= self.states.len() {
                out.push(Violation::UnknownSource { transition: i, source: t.source });
            }
            let outcomes = &t.dist.outcomes;
            if outcomes.is_empty() {
                out.push(Violation::EmptyDistribution { transition: i });
                continue;
            }
            let mut pairs = BTreeMap::new();
            for o in outcomes {
                if o.target >= self.states.len() {
                    out.push(Violation::UnknownState { transition: i, target: o.target });
                }
                if !self.signature.contains(&o.label) {
                    out.push(Violation::UnknownLabel { transition: i, label: o.label.clone() });
                }
                if o.prob.is_zero() || !is_probability(&o.prob) {
                    out.push(Violation::ProbabilityOutOfRange {
                        transition: i,
                        label: o.label.clone(),
                        prob: o.prob.clone(),
                    });
                }
                if pairs.insert((&o.label, o.target), ()).is_some() {
                    out.push(Violation::DuplicateOutcome {
                        transition: i,
                        label: o.label.clone(),
                        target: o.target,
                    });
                }
            }
            let total = t.dist.total();
            if !total.is_one() {
                out.push(Violation::MassNotOne { transition: i, total });
            }
            if let Some(first_input) = outcomes.iter().find(|o| o.label.is_input()) {
                if outcomes.iter().any(|o| o.label != first_input.label) {
                    out.push(Violation::InputReactivity { transition: i });
                }
            }
        }
        out
    }

    /// True iff every state enables every input of the signature.
    pub fn is_input_enabled(&self) -> bool {
        (0..self.states.len()).all(|s| {
            let enabled = self.enabled(s);
            self.signature.inputs().all(|a| enabled.contains(&a))
        })
    }

    /// True iff every distribution is a Dirac distribution.
    pub fn is_qts(&self) -> bool {
        self.transitions.iter().all(|t| t.dist.is_dirac())
    }

    /// True iff no cycle is reachable from the initial state.
    pub fn is_acyclic(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let mut mark = vec![Mark::New; self.states.len()];
        let mut stack = vec![(self.initial, 0usize)];
        if self.initial >= self.states.len() {
            return true;
        }
        mark[self.initial] = Mark::Open;
        while let Some(&mut (state, ref mut next)) = stack.last_mut() {
            let succ: Vec<usize> = self
                .transitions_from(state)
                .iter()
                .flat_map(|&t| self.transitions[t].dist.outcomes.iter().map(|o| o.target))
                .collect();
            if *next < succ.len() {
                let target = succ[*next];
                *next += 1;
                match mark.get(target) {
                    Some(Mark::Open) => return false,
                    Some(Mark::New) => {
                        mark[target] = Mark::Open;
                        stack.push((target, 0));
                    }
                    _ => {}
                }
            } else {
                mark[state] = Mark::Done;
                stack.pop();
            }
        }
        true
    }
}

/// Serializes to the line-oriented text format read by [`parse_pqts`].
impl fmt::Display for Pqts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_model(f, "pqts", self)
    }
}

pub(crate) fn write_model(f: &mut impl fmt::Write, header: &str, p: &Pqts) -> fmt::Result {
    writeln!(f, "{header} {}", p.name)?;
    let join = |labels: Vec<Label>| labels.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
    writeln!(f, "inputs: {}", join(p.signature.inputs().collect()))?;
    writeln!(f, "outputs: {}", join(p.signature.outputs().collect()))?;
    let states: Vec<String> = p
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| if i == p.initial { format!("{s} init") } else { s.clone() })
        .collect();
    writeln!(f, "states: {}", states.join(", "))?;
    for t in &p.transitions {
        let entries: Vec<String> = t
            .dist
            .outcomes
            .iter()
            .map(|o| format!("{} {} -> {}", o.label, o.prob, p.states[o.target]))
            .collect();
        writeln!(f, "trans {}: {{ {} }}", p.states[t.source], entries.join(", "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn two_state(outcomes: Vec<Outcome>) -> Pqts {
        Pqts::new(
            "m",
            vec!["s0".into(), "s1".into()],
            0,
            Signature::new(["a"], ["b"]),
            vec![Transition { source: 0, dist: Distribution::new(outcomes) }],
        )
    }

    #[test]
    fn label_tokens() {
        assert_eq!(Label::parse_token("a?"), Some(Label::input("a")));
        assert_eq!(Label::parse_token("b!"), Some(Label::output("b")));
        assert_eq!(Label::parse_token("delta"), Some(Label::delta()));
        assert_eq!(Label::parse_token("delta!"), None);
        assert_eq!(Label::parse_token("x"), None);
        assert_eq!(Label::input("a").mirrored(), Label::output("a"));
        assert_eq!(Label::delta().mirrored(), Label::delta());
    }

    #[test]
    fn mass_violation_is_reported_once() {
        let p = two_state(vec![Outcome { label: Label::output("b"), target: 1, prob: ratio(9, 10) }]);
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::MassNotOne { transition: 0, .. }));
    }

    #[test]
    fn unknown_state_is_reported_once() {
        let p = two_state(vec![Outcome { label: Label::output("b"), target: 7, prob: ratio(1, 1) }]);
        assert_eq!(p.validate(), vec![Violation::UnknownState { transition: 0, target: 7 }]);
    }

    #[test]
    fn input_reactivity_violation() {
        let p = two_state(vec![
            Outcome { label: Label::input("a"), target: 1, prob: ratio(1, 2) },
            Outcome { label: Label::output("b"), target: 0, prob: ratio(1, 2) },
        ]);
        assert_eq!(p.validate(), vec![Violation::InputReactivity { transition: 0 }]);
    }

    #[test]
    fn each_violation_class_is_detected() {
        let p = Pqts::new(
            "bad",
            vec!["s".into(), "s".into()],
            5,
            Signature::new(["a", "delta"], ["a"]),
            vec![
                Transition { source: 9, dist: Distribution::new(vec![]) },
                Transition {
                    source: 0,
                    dist: Distribution::new(vec![
                        Outcome { label: Label::output("zz"), target: 0, prob: ratio(3, 2) },
                        Outcome { label: Label::output("zz"), target: 0, prob: ratio(-1, 2) },
                    ]),
                },
            ],
        );
        let v = p.validate();
        let has = |f: fn(&Violation) -> bool| v.iter().any(f);
        assert!(has(|v| matches!(v, Violation::InitialOutOfRange { .. })));
        assert!(has(|v| matches!(v, Violation::DuplicateState { .. })));
        assert!(has(|v| matches!(v, Violation::SignatureOverlap { .. })));
        assert!(has(|v| matches!(v, Violation::ReservedLabel { .. })));
        assert!(has(|v| matches!(v, Violation::UnknownSource { .. })));
        assert!(has(|v| matches!(v, Violation::EmptyDistribution { .. })));
        assert!(has(|v| matches!(v, Violation::UnknownLabel { .. })));
        assert!(has(|v| matches!(v, Violation::ProbabilityOutOfRange { .. })));
        assert!(has(|v| matches!(v, Violation::DuplicateOutcome { .. })));
        assert!(!has(|v| matches!(v, Violation::MassNotOne { .. })));
    }

    #[test]
    fn empty_input_set_is_input_enabled() {
        let p = Pqts::new(
            "q",
            vec!["s0".into()],
            0,
            Signature::new(Vec::<&str>::new(), ["x"]),
            vec![Transition { source: 0, dist: Distribution::dirac(Label::delta(), 0) }],
        );
        assert!(p.is_input_enabled());
        assert!(p.is_qts());
        assert!(p.validate().is_empty());
    }

    #[test]
    fn cycle_detection() {
        let p = two_state(vec![Outcome { label: Label::output("b"), target: 1, prob: ratio(1, 1) }]);
        assert!(p.is_acyclic());
        let q = two_state(vec![Outcome { label: Label::output("b"), target: 0, prob: ratio(1, 1) }]);
        assert!(!q.is_acyclic());
    }
}
