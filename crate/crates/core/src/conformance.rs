//! Bounded-depth decision procedures for ioco, trace-distribution inclusion
//! and pioco.

use std::fmt;

use crate::behavior::{out, traces_upto_capped, BehaviorError, Trace, DEFAULT_TRACE_CAP};
use crate::convex::{contains, hrep_capped, ConstrainedHull, Containment, ConvexError, HRep, DEFAULT_FACET_CAP};
use crate::model::{Label, Pqts};
use crate::rational::Rational;
use crate::sched::{vertices_capped, SchedError, TraceDistVector, TraceIndex, DEFAULT_ADVERSARY_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Ioco,
    Td,
    Pioco,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Ioco => "ioco",
            Relation::Td => "td",
            Relation::Pioco => "pioco",
        })
    }
}

/// Which prefix cones the `⊑_k` side condition of pioco pins down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrefixMode {
    /// Every trace of length at most `k`.
    #[default]
    AllPrefixes,
    /// Only traces of length exactly `k`.
    ExactLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub prefix_mode: PrefixMode,
    pub adversary_cap: usize,
    pub facet_cap: usize,
    pub trace_cap: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            prefix_mode: PrefixMode::default(),
            adversary_cap: DEFAULT_ADVERSARY_CAP,
            facet_cap: DEFAULT_FACET_CAP,
            trace_cap: DEFAULT_TRACE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConformanceError {
    #[error("{0} is not a QTS (it has a non-Dirac distribution)")]
    NotQts(&'static str),
    #[error("the implementation is not input-enabled")]
    NotInputEnabled,
    #[error("action signatures differ")]
    SignatureMismatch,
    #[error("pioco needs a depth bound of at least 1")]
    ZeroDepth,
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

impl ConformanceError {
    /// True when the failure is a resource cap rather than bad input.
    pub fn is_cap(&self) -> bool {
        matches!(
            self,
            ConformanceError::Behavior(BehaviorError::TraceCapExceeded { .. })
                | ConformanceError::Sched(SchedError::AdversaryCapExceeded { .. })
                | ConformanceError::Sched(SchedError::NodeCapExceeded { .. })
                | ConformanceError::Convex(ConvexError::FacetCapExceeded { .. })
        )
    }
}

/// A halfspace over trace coordinates: `Σ coeff·P(C_σ) ≤ offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFacet {
    pub terms: Vec<(Trace, Rational)>,
    pub offset: Rational,
}

impl fmt::Display for TraceFacet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.terms.iter().map(|(t, c)| format!("{c}·P({t})")).collect();
        write!(f, "{} <= {}", terms.join(" + "), self.offset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// `output` is observable after `trace` in the implementation but not in the specification.
    Output { trace: Trace, output: Label },
    /// A trace distribution of the left system at `depth` lying outside the right one.
    Point { depth: usize, point: TraceDistVector, facet: TraceFacet, excess: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConformanceVerdict {
    pub relation: Relation,
    pub bound: usize,
    pub witness: Option<Witness>,
}

impl ConformanceVerdict {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

fn same_signature(a: &Pqts, b: &Pqts) -> Result<(), ConformanceError> {
    if a.signature() == b.signature() {
        Ok(())
    } else {
        Err(ConformanceError::SignatureMismatch)
    }
}

/// ioco on QTSs: every output the implementation shows after a
/// specification trace of length below `bound` is allowed by the specification.
pub fn check_ioco(imp: &Pqts, spec: &Pqts, bound: usize) -> Result<ConformanceVerdict, ConformanceError> {
    check_ioco_with(imp, spec, bound, &CheckOptions::default())
}

pub fn check_ioco_with(
    imp: &Pqts,
    spec: &Pqts,
    bound: usize,
    opts: &CheckOptions,
) -> Result<ConformanceVerdict, ConformanceError> {
    same_signature(imp, spec)?;
    if !imp.is_qts() {
        return Err(ConformanceError::NotQts("the implementation"));
    }
    if !spec.is_qts() {
        return Err(ConformanceError::NotQts("the specification"));
    }
    if !imp.is_input_enabled() {
        return Err(ConformanceError::NotInputEnabled);
    }
    let mut verdict = ConformanceVerdict { relation: Relation::Ioco, bound, witness: None };
    if bound == 0 {
        return Ok(verdict);
    }
    let mut traces: Vec<Trace> = traces_upto_capped(spec, bound - 1, opts.trace_cap)?.into_iter().collect();
    traces.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    for sigma in traces {
        let allowed = out(spec, &sigma);
        if let Some(bad) = out(imp, &sigma).into_iter().find(|l| !allowed.contains(l)) {
            verdict.witness = Some(Witness::Output { trace: sigma, output: bad });
            break;
        }
    }
    Ok(verdict)
}

fn embed_all(index: &TraceIndex, vs: &[TraceDistVector]) -> Vec<crate::convex::RVector> {
    vs.iter().map(|v| index.embed(v)).collect()
}

fn point_witness(index: &TraceIndex, depth: usize, c: Containment) -> Option<Witness> {
    match c {
        Containment::Contained => None,
        Containment::Violated { point, facet, excess, .. } => {
            let terms = index
                .traces()
                .iter()
                .zip(facet.normal.coords())
                .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
                .map(|(t, c)| (t.clone(), c.clone()))
                .collect();
            Some(Witness::Point {
                depth,
                point: index.unembed(&point, depth),
                facet: TraceFacet { terms, offset: facet.offset },
                excess,
            })
        }
    }
}

/// Bounded trace-distribution inclusion `trd(a, k) ⊆ trd(b, k)` for every `k ≤ bound`,
/// compared on the traces of `a`.
pub fn check_td_inclusion(a: &Pqts, b: &Pqts, bound: usize) -> Result<ConformanceVerdict, ConformanceError> {
    check_td_inclusion_with(a, b, bound, &CheckOptions::default())
}

pub fn check_td_inclusion_with(
    a: &Pqts,
    b: &Pqts,
    bound: usize,
    opts: &CheckOptions,
) -> Result<ConformanceVerdict, ConformanceError> {
    same_signature(a, b)?;
    let mut verdict = ConformanceVerdict { relation: Relation::Td, bound, witness: None };
    for k in 0..=bound {
        let index = TraceIndex::new(traces_upto_capped(a, k, opts.trace_cap)?);
        let pv = embed_all(&index, &vertices_capped(a, k, false, opts.adversary_cap)?);
        let qv = embed_all(&index, &vertices_capped(b, k, false, opts.adversary_cap)?);
        let q = hrep_capped(&qv, opts.facet_cap)?;
        let c = contains(&ConstrainedHull::hull(pv), &q)?;
        if let Some(w) = point_witness(&index, k, c) {
            verdict.witness = Some(w);
            break;
        }
    }
    Ok(verdict)
}

/// Bounded pioco: levels `k = 0 .. bound-1`.
pub fn check_pioco(imp: &Pqts, spec: &Pqts, bound: usize) -> Result<ConformanceVerdict, ConformanceError> {
    check_pioco_with(imp, spec, bound, &CheckOptions::default())
}

pub fn check_pioco_with(
    imp: &Pqts,
    spec: &Pqts,
    bound: usize,
    opts: &CheckOptions,
) -> Result<ConformanceVerdict, ConformanceError> {
    same_signature(imp, spec)?;
    if !imp.is_input_enabled() {
        return Err(ConformanceError::NotInputEnabled);
    }
    if bound == 0 {
        return Err(ConformanceError::ZeroDepth);
    }
    let mut verdict = ConformanceVerdict { relation: Relation::Pioco, bound, witness: None };
    for k in 0..bound {
        let index = TraceIndex::new(traces_upto_capped(imp, k + 1, opts.trace_cap)?);
        let pinned: Vec<usize> = index
            .traces()
            .iter()
            .enumerate()
            .filter(|(_, t)| match opts.prefix_mode {
                PrefixMode::AllPrefixes => t.len() <= k,
                PrefixMode::ExactLength => t.len() == k,
            })
            .map(|(i, _)| i)
            .collect();
        let sub = TraceIndex::new(pinned.iter().map(|&i| index.traces()[i].clone()));
        let spec_prefix = embed_all(&sub, &vertices_capped(spec, k, false, opts.adversary_cap)?);
        let constraint: HRep = hrep_capped(&spec_prefix, opts.facet_cap)?.lift(&pinned, index.dim());

        let pv = embed_all(&index, &vertices_capped(imp, k + 1, true, opts.adversary_cap)?);
        let qv = embed_all(&index, &vertices_capped(spec, k + 1, true, opts.adversary_cap)?);
        let q = hrep_capped(&qv, opts.facet_cap)?;
        let c = contains(&ConstrainedHull::new(pv, constraint), &q)?;
        if let Some(w) = point_witness(&index, k + 1, c) {
            verdict.witness = Some(w);
            break;
        }
    }
    Ok(verdict)
}
