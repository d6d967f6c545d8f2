//! Test cases: mirrored-signature acyclic systems with pass/fail
//! annotations, parallel composition, generation and execution.

mod compose;
mod generate;
mod run;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::behavior::{ctraces, reach, BehaviorError, Trace};
use crate::model::{parse_document, write_model, DocumentKind, Label, ParseError, Pqts};

pub use compose::{compatible, compose, compose_with_pairs};
pub use generate::generate_tests;
pub use run::{run_test, ExternalSut, RunError, RunOutcome, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TestgenError {
    #[error("the systems share an output action `{0}`")]
    Incompatible(String),
    #[error("the test's signature is not the mirror of the specification's")]
    SignatureMismatch,
    #[error("the specification has no transitions")]
    NoTransitions,
    #[error("not a valid test: {0}")]
    InvalidTest(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
}

/// A test case together with its annotation. Traces in the annotation use
/// the test's own (mirrored) labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTest {
    pub test: Pqts,
    pub annotation: BTreeMap<Trace, Verdict>,
}

impl AnnotatedTest {
    /// Verdict of a complete trace given in the specification's view.
    pub fn verdict_of(&self, spec_view: &Trace) -> Option<Verdict> {
        self.annotation.get(&spec_view.mirrored()).copied()
    }

    /// Length of the longest complete trace.
    pub fn depth(&self) -> usize {
        self.annotation.keys().map(|t| t.len()).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_model(&mut out, "test", &self.test).expect("writing to a string");
        for (t, v) in &self.annotation {
            let tokens = t.tokens();
            let sep = if tokens.is_empty() { "" } else { " " };
            out.push_str(&format!("annot{sep}{tokens} = {v}\n"));
        }
        out
    }

    /// Reads a test file and checks that annotations cover exactly the
    /// complete traces.
    pub fn parse(text: &str) -> Result<Self, TestgenError> {
        let doc = parse_document(text)?;
        if doc.kind != DocumentKind::Test {
            return Err(TestgenError::InvalidTest("expected a `test <name>` header".into()));
        }
        let violations = doc.model.validate();
        if !violations.is_empty() {
            return Err(ParseError::Invalid(violations).into());
        }
        let mut annotation = BTreeMap::new();
        for a in doc.annotations {
            let t = Trace::new(a.trace);
            if annotation.insert(t.clone(), Verdict::from_bool(a.pass)).is_some() {
                return Err(TestgenError::InvalidTest(format!("line {}: trace {t} annotated twice", a.line)));
            }
        }
        let complete = ctraces(&doc.model)?;
        if annotation.keys().cloned().collect::<BTreeSet<_>>() != complete {
            return Err(TestgenError::InvalidTest("annotations must cover exactly the complete traces".into()));
        }
        Ok(AnnotatedTest { test: doc.model, annotation })
    }
}

/// Checks the structural rules for a test over `spec`'s mirrored signature.
pub fn validate_test(t: &Pqts, spec: &Pqts) -> Result<(), TestgenError> {
    if t.signature() != &spec.signature().mirrored() {
        return Err(TestgenError::SignatureMismatch);
    }
    let bad = |m: String| Err(TestgenError::InvalidTest(m));
    if !t.validate().is_empty() {
        return bad("structural violations".into());
    }
    if !t.is_qts() {
        return bad("tests use Dirac distributions only".into());
    }
    if !t.is_acyclic() {
        return bad("tests must be acyclic".into());
    }
    let observations: BTreeSet<Label> = t.signature().inputs().chain(std::iter::once(Label::delta())).collect();
    for s in 0..t.num_states() {
        let labels: Vec<Label> = t
            .transitions_from(s)
            .iter()
            .map(|&i| t.transition(i).dist.outcomes()[0].label.clone())
            .collect();
        let set: BTreeSet<Label> = labels.iter().cloned().collect();
        if set.len() != labels.len() {
            return bad(format!("state {} has two transitions with the same label", t.state_name(s)));
        }
        let stimuli: Vec<&Label> = set.iter().filter(|l| l.is_output()).collect();
        let obs: BTreeSet<Label> = set.iter().filter(|l| !l.is_output()).cloned().collect();
        let ok = set.is_empty() || (stimuli.len() <= 1 && obs == observations);
        if !ok {
            return bad(format!("state {} does not offer a valid set of actions", t.state_name(s)));
        }
    }
    Ok(())
}

/// Annotates every complete trace of `t`: a trace fails iff it leaves the
/// specification through an output or quiescence.
pub fn annotate(spec: &Pqts, t: &Pqts) -> Result<AnnotatedTest, TestgenError> {
    if t.signature() != &spec.signature().mirrored() {
        return Err(TestgenError::SignatureMismatch);
    }
    let annotation = ctraces(t)?
        .into_iter()
        .map(|ct| {
            let v = annotate_trace(spec, &ct.mirrored());
            (ct, v)
        })
        .collect();
    Ok(AnnotatedTest { test: t.clone(), annotation })
}

/// Verdict of a trace given in the specification's view.
pub fn annotate_trace(spec: &Pqts, sigma: &Trace) -> Verdict {
    let mut states = BTreeSet::from([spec.initial()]);
    for label in sigma.iter() {
        if states.is_empty() {
            break;
        }
        if label.is_observable_output() {
            let allowed = states.iter().any(|&s| spec.enabled(s).contains(label));
            if !allowed {
                return Verdict::Fail;
            }
        }
        states = reach(spec, &states, std::slice::from_ref(label));
    }
    Verdict::Pass
}

/// The complete test traces, in the implementation's view, that `imp` can exhibit.
pub fn exec_traces(t: &AnnotatedTest, imp: &Pqts) -> Result<BTreeSet<Trace>, TestgenError> {
    if t.test.signature() != &imp.signature().mirrored() {
        return Err(TestgenError::SignatureMismatch);
    }
    let init = BTreeSet::from([imp.initial()]);
    Ok(t
        .annotation
        .keys()
        .map(Trace::mirrored)
        .filter(|s| !reach(imp, &init, s).is_empty())
        .collect())
}
