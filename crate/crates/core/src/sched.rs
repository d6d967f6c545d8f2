//! Depth-bounded unfoldings, adversaries and trace distributions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::behavior::{Path, Trace};
use crate::convex::RVector;
use crate::model::{Label, Pqts};
use crate::rational::{parse_rational, Rational};

/// Default bound on unfolding nodes.
pub const DEFAULT_NODE_CAP: usize = 100_000;
/// Default bound on adversaries (vertex vectors) per enumeration step.
pub const DEFAULT_ADVERSARY_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchedError {
    #[error("unfolding exceeded the cap of {cap} nodes")]
    NodeCapExceeded { cap: usize },
    #[error("adversary enumeration exceeded the cap of {cap}")]
    AdversaryCapExceeded { cap: usize },
    #[error("path is not part of the unfolding")]
    PathNotInTree,
    #[error("node {node}: {message}")]
    InvalidChoice { node: usize, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeOption {
    pub transition: usize,
    /// Child node per outcome of the transition's distribution, in order.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub state: usize,
    pub depth: usize,
    pub trace: Trace,
    pub parent: Option<usize>,
    /// Position among the nodes sharing this trace, in creation order.
    pub trace_index: usize,
    pub options: Vec<TreeOption>,
}

/// The tree of paths of length at most `depth`. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnfoldTree {
    pub depth: usize,
    pub nodes: Vec<TreeNode>,
}

pub fn unfold(p: &Pqts, k: usize) -> Result<UnfoldTree, SchedError> {
    unfold_capped(p, k, DEFAULT_NODE_CAP)
}

pub fn unfold_capped(p: &Pqts, k: usize, cap: usize) -> Result<UnfoldTree, SchedError> {
    let mut nodes = vec![TreeNode {
        state: p.initial(),
        depth: 0,
        trace: Trace::empty(),
        parent: None,
        trace_index: 0,
        options: Vec::new(),
    }];
    let mut per_trace: HashMap<Trace, usize> = HashMap::from([(Trace::empty(), 1)]);
    let mut i = 0;
    while i < nodes.len() {
        if nodes[i].depth < k {
            let state = nodes[i].state;
            let mut options = Vec::new();
            for &t in p.transitions_from(state) {
                let mut children = Vec::new();
                for o in p.transition(t).dist.outcomes() {
                    let trace = nodes[i].trace.then(o.label.clone());
                    let slot = per_trace.entry(trace.clone()).or_insert(0);
                    let trace_index = *slot;
                    *slot += 1;
                    children.push(nodes.len());
                    nodes.push(TreeNode {
                        state: o.target,
                        depth: nodes[i].depth + 1,
                        trace,
                        parent: Some(i),
                        trace_index,
                        options: Vec::new(),
                    });
                    if nodes.len() > cap {
                        return Err(SchedError::NodeCapExceeded { cap });
                    }
                }
                options.push(TreeOption { transition: t, children });
            }
            nodes[i].options = options;
        }
        i += 1;
    }
    Ok(UnfoldTree { depth: k, nodes })
}

impl UnfoldTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// The node reached by following `path` from the root.
    pub fn node_for_path(&self, path: &Path) -> Option<usize> {
        if path.start != self.nodes[0].state {
            return None;
        }
        let mut cur = 0;
        for step in &path.steps {
            let opt = self.nodes[cur].options.iter().find(|o| o.transition == step.transition)?;
            cur = *opt
                .children
                .iter()
                .find(|&&c| self.nodes[c].state == step.target && self.nodes[c].trace.last() == Some(&step.label))?;
        }
        Some(cur)
    }

    pub fn node_by_trace(&self, trace: &Trace, index: usize) -> Option<usize> {
        self.nodes.iter().position(|n| &n.trace == trace && n.trace_index == index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Choice {
    Halt,
    /// Index of a transition in the model.
    Transition(usize),
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Halt => f.write_str("halt"),
            Choice::Transition(t) => write!(f, "t{t}"),
        }
    }
}

/// A randomized, partial, history-dependent scheduler on an unfolding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adversary {
    tree: UnfoldTree,
    choices: Vec<Vec<(Choice, Rational)>>,
}

impl Adversary {
    /// Halts everywhere.
    pub fn halting(tree: UnfoldTree) -> Self {
        let choices = vec![vec![(Choice::Halt, Rational::one())]; tree.nodes.len()];
        Adversary { tree, choices }
    }

    /// Builds an adversary from a per-node choice function. Nodes at the
    /// depth bound always halt regardless of `f`.
    pub fn from_fn(
        tree: UnfoldTree,
        mut f: impl FnMut(&UnfoldTree, usize) -> Vec<(Choice, Rational)>,
    ) -> Result<Self, SchedError> {
        let choices = (0..tree.nodes.len())
            .map(|n| {
                if tree.nodes[n].depth >= tree.depth {
                    vec![(Choice::Halt, Rational::one())]
                } else {
                    f(&tree, n)
                }
            })
            .collect();
        let adv = Adversary { tree, choices };
        adv.check()?;
        Ok(adv)
    }

    pub fn tree(&self) -> &UnfoldTree {
        &self.tree
    }

    pub fn depth(&self) -> usize {
        self.tree.depth
    }

    pub fn choices(&self, node: usize) -> &[(Choice, Rational)] {
        &self.choices[node]
    }

    pub fn weight(&self, node: usize, choice: Choice) -> Rational {
        self.choices[node].iter().filter(|(c, _)| *c == choice).map(|(_, w)| w).sum()
    }

    pub fn is_deterministic(&self) -> bool {
        self.choices.iter().all(|c| c.iter().filter(|(_, w)| !w.is_zero()).count() == 1)
    }

    fn check(&self) -> Result<(), SchedError> {
        for (n, ch) in self.choices.iter().enumerate() {
            let bad = |message: String| Err(SchedError::InvalidChoice { node: n, message });
            let node = &self.tree.nodes[n];
            let mut total = Rational::zero();
            for (c, w) in ch {
                if w.is_negative() || *w > Rational::one() {
                    return bad(format!("weight {w} outside [0,1]"));
                }
                total += w;
                if let Choice::Transition(t) = c {
                    if !w.is_zero() && !node.options.iter().any(|o| o.transition == *t) {
                        return bad(format!("transition t{t} is not available here"));
                    }
                    if !w.is_zero() && node.depth >= self.tree.depth {
                        return bad("nodes at the depth bound must halt".into());
                    }
                }
            }
            if !total.is_one() {
                return bad(format!("weights sum to {total}"));
            }
        }
        Ok(())
    }

    /// Writes the non-trivial choices, one node per line. Nodes not listed halt.
    pub fn to_text(&self) -> String {
        let mut out = format!("adversary depth {}\n", self.tree.depth);
        for (n, ch) in self.choices.iter().enumerate() {
            if ch.len() == 1 && ch[0].0 == Choice::Halt {
                continue;
            }
            let node = &self.tree.nodes[n];
            let weights: Vec<String> = ch.iter().map(|(c, w)| format!("{c} {w}")).collect();
            let trace = node.trace.tokens();
            let sep = if trace.is_empty() { "" } else { " " };
            out.push_str(&format!("node {trace}{sep}#{}: {}\n", node.trace_index, weights.join(", ")));
        }
        out
    }

    /// Reads the format produced by [`Adversary::to_text`] against `p`.
    pub fn parse(text: &str, p: &Pqts) -> Result<Self, SchedError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let syntax = |line: usize, message: &str| SchedError::Syntax { line, message: message.to_string() };
        let (hline, header) = lines.next().ok_or_else(|| syntax(1, "empty adversary"))?;
        let depth: usize = header
            .trim()
            .strip_prefix("adversary depth ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| syntax(hline, "expected `adversary depth <k>`"))?;
        let tree = unfold(p, depth)?;
        let mut choices = vec![vec![(Choice::Halt, Rational::one())]; tree.nodes.len()];
        for (line, text) in lines {
            let body = text.trim().strip_prefix("node").ok_or_else(|| syntax(line, "expected `node`"))?;
            let (head, rest) = body.split_once(':').ok_or_else(|| syntax(line, "expected `:`"))?;
            let (trace_text, idx_text) = head.rsplit_once('#').ok_or_else(|| syntax(line, "expected `#<index>`"))?;
            let trace = Trace::parse(trace_text).ok_or_else(|| syntax(line, "bad trace"))?;
            let idx: usize = idx_text.trim().parse().map_err(|_| syntax(line, "bad node index"))?;
            let node = tree.node_by_trace(&trace, idx).ok_or_else(|| syntax(line, "no such node"))?;
            let mut ch = Vec::new();
            for item in rest.split(',') {
                let mut parts = item.split_whitespace();
                let c = match parts.next() {
                    Some("halt") => Choice::Halt,
                    Some(t) => Choice::Transition(
                        t.strip_prefix('t').and_then(|n| n.parse().ok()).ok_or_else(|| syntax(line, "bad choice"))?,
                    ),
                    None => return Err(syntax(line, "empty choice")),
                };
                let w = parts
                    .next()
                    .and_then(|w| parse_rational(w).ok())
                    .ok_or_else(|| syntax(line, "bad weight"))?;
                ch.push((c, w));
            }
            choices[node] = ch;
        }
        let adv = Adversary { tree, choices };
        adv.check()?;
        Ok(adv)
    }
}

/// Probability that `adv` produces the finite path `path`.
pub fn path_prob(p: &Pqts, adv: &Adversary, path: &Path) -> Result<Rational, SchedError> {
    let tree = adv.tree();
    if path.start != tree.root().state || path.len() > tree.depth {
        return Err(SchedError::PathNotInTree);
    }
    let mut q = Rational::one();
    let mut cur = 0;
    for step in &path.steps {
        let opt = tree.nodes[cur]
            .options
            .iter()
            .find(|o| o.transition == step.transition)
            .ok_or(SchedError::PathNotInTree)?;
        let dist = &p.transition(step.transition).dist;
        let (pos, outcome) = dist
            .outcomes()
            .iter()
            .enumerate()
            .find(|(_, o)| o.label == step.label && o.target == step.target)
            .ok_or(SchedError::PathNotInTree)?;
        q *= adv.weight(cur, Choice::Transition(step.transition)) * &outcome.prob;
        cur = opt.children[pos];
    }
    Ok(q)
}

/// Cone probabilities of all traces of length at most `depth`. Zero entries
/// are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceDistVector {
    pub depth: usize,
    pub entries: BTreeMap<Trace, Rational>,
}

impl TraceDistVector {
    pub fn get(&self, trace: &Trace) -> Rational {
        self.entries.get(trace).cloned().unwrap_or_else(Rational::zero)
    }

    /// Total cone mass on traces of exactly the given length.
    pub fn mass_at(&self, len: usize) -> Rational {
        self.entries.iter().filter(|(t, _)| t.len() == len).map(|(_, v)| v).sum()
    }

    /// Describes every violated invariant; empty when well formed.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.get(&Trace::empty()).is_one() {
            out.push("cone of the empty trace is not 1".into());
        }
        let mut children: BTreeMap<Trace, Rational> = BTreeMap::new();
        for (t, v) in &self.entries {
            if v.is_negative() || *v > Rational::one() {
                out.push(format!("entry {t} = {v} outside [0,1]"));
            }
            if t.len() > self.depth {
                out.push(format!("trace {t} longer than depth {}", self.depth));
            }
            if !t.is_empty() {
                *children.entry(t.prefix(t.len() - 1)).or_insert_with(Rational::zero) += v;
            }
        }
        for (parent, sum) in children {
            if sum > self.get(&parent) {
                out.push(format!("extensions of {parent} carry {sum} > its cone"));
            }
        }
        out
    }
}

impl fmt::Display for TraceDistVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(t, v)| format!("{t} ↦ {v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

pub fn trace_vector(adv: &Adversary, p: &Pqts) -> TraceDistVector {
    let tree = adv.tree();
    let mut entries: BTreeMap<Trace, Rational> = BTreeMap::new();
    let mut stack = vec![(0usize, Rational::one())];
    while let Some((n, q)) = stack.pop() {
        if q.is_zero() {
            continue;
        }
        let node = &tree.nodes[n];
        *entries.entry(node.trace.clone()).or_insert_with(Rational::zero) += &q;
        for opt in &node.options {
            let w = adv.weight(n, Choice::Transition(opt.transition));
            if w.is_zero() {
                continue;
            }
            for (o, &child) in p.transition(opt.transition).dist.outcomes().iter().zip(&opt.children) {
                stack.push((child, &q * &w * &o.prob));
            }
        }
    }
    entries.retain(|_, v| !v.is_zero());
    TraceDistVector { depth: tree.depth, entries }
}

/// Sorted, duplicate-free trace vectors of all deterministic adversaries
/// halting after `k` steps. With `output_final_only`, the last step may only
/// schedule distributions without inputs.
pub fn vertices(p: &Pqts, k: usize, output_final_only: bool) -> Result<Vec<TraceDistVector>, SchedError> {
    vertices_capped(p, k, output_final_only, DEFAULT_ADVERSARY_CAP)
}

type Relative = BTreeMap<Vec<Label>, Rational>;

pub fn vertices_capped(
    p: &Pqts,
    k: usize,
    output_final_only: bool,
    cap: usize,
) -> Result<Vec<TraceDistVector>, SchedError> {
    let mut memo: HashMap<(usize, usize), BTreeSet<Relative>> = HashMap::new();
    let rel = relative_vertices(p, p.initial(), k, output_final_only, cap, &mut memo)?;
    Ok(rel
        .iter()
        .map(|r| TraceDistVector {
            depth: k,
            entries: r.iter().map(|(t, v)| (Trace::new(t.clone()), v.clone())).collect(),
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect())
}

fn relative_vertices(
    p: &Pqts,
    state: usize,
    remaining: usize,
    output_final_only: bool,
    cap: usize,
    memo: &mut HashMap<(usize, usize), BTreeSet<Relative>>,
) -> Result<BTreeSet<Relative>, SchedError> {
    if let Some(v) = memo.get(&(state, remaining)) {
        return Ok(v.clone());
    }
    let halt: Relative = BTreeMap::from([(Vec::new(), Rational::one())]);
    let mut out = BTreeSet::from([halt.clone()]);
    if remaining > 0 {
        for &t in p.transitions_from(state) {
            let dist = &p.transition(t).dist;
            if output_final_only && remaining == 1 && dist.has_input() {
                continue;
            }
            let mut partial: Vec<Relative> = vec![halt.clone()];
            for o in dist.outcomes() {
                let sub = relative_vertices(p, o.target, remaining - 1, output_final_only, cap, memo)?;
                if partial.len().saturating_mul(sub.len()) > cap {
                    return Err(SchedError::AdversaryCapExceeded { cap });
                }
                let mut next = Vec::with_capacity(partial.len() * sub.len());
                for base in &partial {
                    for s in &sub {
                        let mut v = base.clone();
                        for (tail, q) in s {
                            let mut key = Vec::with_capacity(tail.len() + 1);
                            key.push(o.label.clone());
                            key.extend(tail.iter().cloned());
                            *v.entry(key).or_insert_with(Rational::zero) += q * &o.prob;
                        }
                        next.push(v);
                    }
                }
                partial = next;
            }
            out.extend(partial);
            if out.len() > cap {
                return Err(SchedError::AdversaryCapExceeded { cap });
            }
        }
    }
    memo.insert((state, remaining), out.clone());
    Ok(out)
}

/// Coordinates for embedding trace vectors as points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceIndex {
    traces: Vec<Trace>,
    position: HashMap<Trace, usize>,
}

impl TraceIndex {
    pub fn new(traces: impl IntoIterator<Item = Trace>) -> Self {
        let traces: Vec<Trace> = traces.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let position = traces.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        TraceIndex { traces, position }
    }

    pub fn dim(&self) -> usize {
        self.traces.len()
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn position(&self, trace: &Trace) -> Option<usize> {
        self.position.get(trace).copied()
    }

    /// Projects a trace vector onto these coordinates.
    pub fn embed(&self, v: &TraceDistVector) -> RVector {
        RVector::new(self.traces.iter().map(|t| v.get(t)).collect())
    }

    pub fn unembed(&self, x: &RVector, depth: usize) -> TraceDistVector {
        let entries = self
            .traces
            .iter()
            .zip(x.coords())
            .filter(|(_, v)| !v.is_zero())
            .map(|(t, v)| (t.clone(), v.clone()))
            .collect();
        TraceDistVector { depth, entries }
    }
}
