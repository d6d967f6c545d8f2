//! Samples, frequencies, distances and the acceptance ball.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::behavior::Trace;
use crate::model::Pqts;
use crate::rational::{to_f64, Rational};
use crate::sched::{vertices_capped, SchedError, TraceDistVector, DEFAULT_ADVERSARY_CAP};
use crate::seed::derive_seed;
use crate::testgen::{compose, AnnotatedTest, TestgenError, Verdict};

/// Largest number of multinomial outcomes enumerated by the exact method.
pub const EXACT_OUTCOME_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatError {
    #[error("a sample needs at least one trace")]
    EmptySample,
    #[error("trace {index} has length {len}, expected {depth}")]
    WrongLength { index: usize, len: usize, depth: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("trace distribution puts mass {mass} on length-{depth} traces, expected 1")]
    MassNotAtDepth { depth: usize, mass: Rational },
    #[error("depth {found} does not match depth {expected}")]
    DepthMismatch { expected: usize, found: usize },
    #[error("{count} multinomial outcomes exceed the exact limit of {cap}")]
    TooManyOutcomes { count: BigInt, cap: u64 },
    #[error("no candidate trace distribution has all its mass at the test depth")]
    NoCandidates,
    #[error("significance level {0} outside [0,1]")]
    BadAlpha(Rational),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    Testgen(#[from] TestgenError),
}

/// `m` recorded traces, all of length `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    depth: usize,
    traces: Vec<Trace>,
}

impl Sample {
    pub fn new(depth: usize, traces: Vec<Trace>) -> Result<Self, StatError> {
        if traces.is_empty() {
            return Err(StatError::EmptySample);
        }
        if let Some((index, t)) = traces.iter().enumerate().find(|(_, t)| t.len() != depth) {
            return Err(StatError::WrongLength { index, len: t.len(), depth });
        }
        Ok(Sample { depth, traces })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.traces.len()
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    /// `sample k=<k> m=<m>` followed by one trace per line; the empty trace is written `ε`.
    pub fn to_text(&self) -> String {
        let mut out = format!("sample k={} m={}\n", self.depth, self.width());
        for t in &self.traces {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, StatError> {
        let syntax = |line, message: &str| StatError::Syntax { line, message: message.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or_else(|| syntax(1, "missing `sample` header"))?;
        let mut words = header.split_whitespace();
        if words.next() != Some("sample") {
            return Err(syntax(hl, "expected `sample k=<k> m=<m>`"));
        }
        let mut field = |key: &str| -> Result<usize, StatError> {
            words
                .next()
                .and_then(|w| w.strip_prefix(key))
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| syntax(hl, &format!("expected `{key}=<number>`")))
        };
        let depth = field("k")?;
        let width = field("m")?;
        let mut traces = Vec::with_capacity(width);
        for (n, l) in lines {
            let t = if l == "ε" { Some(Trace::empty()) } else { Trace::parse(l) };
            traces.push(t.ok_or_else(|| syntax(n, "malformed trace"))?);
        }
        if traces.len() != width {
            return Err(syntax(hl, &format!("header announces {width} traces, found {}", traces.len())));
        }
        Sample::new(depth, traces)
    }
}

/// A finitely supported distribution over traces; zero entries are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FreqDist {
    pub entries: BTreeMap<Trace, Rational>,
}

impl FreqDist {
    pub fn get(&self, t: &Trace) -> Rational {
        self.entries.get(t).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.entries.values().sum()
    }
}

pub fn freq(o: &Sample) -> FreqDist {
    let m = Rational::from_integer(BigInt::from(o.width()));
    let mut counts: BTreeMap<Trace, usize> = BTreeMap::new();
    for t in &o.traces {
        *counts.entry(t.clone()).or_default() += 1;
    }
    let entries = counts.into_iter().map(|(t, c)| (t, Rational::from_integer(BigInt::from(c)) / &m)).collect();
    FreqDist { entries }
}

/// Coordinate-wise mean of trace distributions whose mass sits entirely on
/// length-`k` traces.
pub fn expected(hs: &[TraceDistVector], k: usize) -> Result<FreqDist, StatError> {
    let n = Rational::from_integer(BigInt::from(hs.len().max(1)));
    let mut entries: BTreeMap<Trace, Rational> = BTreeMap::new();
    for h in hs {
        let mass = h.mass_at(k);
        if !mass.is_one() {
            return Err(StatError::MassNotAtDepth { depth: k, mass });
        }
        for (t, p) in h.entries.iter().filter(|(t, _)| t.len() == k) {
            *entries.entry(t.clone()).or_insert_with(Rational::zero) += p / &n;
        }
    }
    entries.retain(|_, v| !v.is_zero());
    Ok(FreqDist { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Metric {
    /// Euclidean distance.
    #[default]
    L2,
    /// Largest coordinate difference.
    Linf,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::Linf => "linf",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2" | "euclidean" => Ok(Metric::L2),
            "linf" | "max" => Ok(Metric::Linf),
            _ => Err(format!("unknown metric `{s}` (expected l2 or linf)")),
        }
    }
}

/// An exact distance. Euclidean distances are kept squared so they stay rational.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Distance {
    metric: Metric,
    key: Rational,
}

impl Distance {
    fn new(metric: Metric, key: Rational) -> Self {
        Distance { metric, key }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// The distance itself for `linf`, its square for `l2`.
    pub fn comparable(&self) -> &Rational {
        &self.key
    }

    /// The distance as a rational, when it is one.
    pub fn exact(&self) -> Option<Rational> {
        match self.metric {
            Metric::Linf => Some(self.key.clone()),
            Metric::L2 => {
                let (n, d) = (self.key.numer(), self.key.denom());
                let (rn, rd) = (n.sqrt(), d.sqrt());
                (&rn * &rn == *n && &rd * &rd == *d).then(|| Rational::new(rn, rd))
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self.metric {
            Metric::Linf => to_f64(&self.key),
            Metric::L2 => to_f64(&self.key).sqrt(),
        }
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        (self.metric == other.metric).then(|| self.key.cmp(&other.key))
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact() {
            Some(r) => write!(f, "{r}"),
            None => write!(f, "sqrt({})", self.key),
        }
    }
}

pub fn distance(a: &FreqDist, b: &FreqDist, metric: Metric) -> Distance {
    let mut diffs = Vec::new();
    for (t, p) in &a.entries {
        diffs.push((p - b.get(t)).abs());
    }
    for (_, q) in b.entries.iter().filter(|(t, _)| !a.entries.contains_key(*t)) {
        diffs.push(q.abs());
    }
    let key = match metric {
        Metric::Linf => diffs.into_iter().max().unwrap_or_else(Rational::zero),
        Metric::L2 => diffs.iter().map(|d| d * d).sum(),
    };
    Distance::new(metric, key)
}

/// How the acceptance radius is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Enumerate all multinomial outcomes; fails beyond [`EXACT_OUTCOME_CAP`].
    Exact,
    /// Estimate from `draws` seeded samples.
    MonteCarlo { draws: usize, seed: u64 },
    /// Exact when feasible, Monte-Carlo otherwise.
    Auto { draws: usize, seed: u64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Exact
    }
}

impl FromStr for Method {
    type Err = String;

    /// `exact`, `mc:<N>` or `auto:<N>`; the Monte-Carlo seed is set separately.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let draws = |v: &str| v.parse::<usize>().ok().filter(|&n| n > 0).ok_or(format!("bad draw count in `{s}`"));
        match s.split_once(':') {
            None if s == "exact" => Ok(Method::Exact),
            Some(("mc", n)) => Ok(Method::MonteCarlo { draws: draws(n)?, seed: 0 }),
            Some(("auto", n)) => Ok(Method::Auto { draws: draws(n)?, seed: 0 }),
            _ => Err(format!("unknown method `{s}` (expected exact, mc:<N> or auto:<N>)")),
        }
    }
}

impl Method {
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Method::Exact => Method::Exact,
            Method::MonteCarlo { draws, .. } => Method::MonteCarlo { draws, seed },
            Method::Auto { draws, .. } => Method::Auto { draws, seed },
        }
    }
}

/// The acceptance radius. `None` stands for an unbounded ball, which is what
/// a significance level of 0 demands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Radius {
    pub value: Option<Distance>,
    pub approximate: bool,
}

impl Radius {
    pub fn admits(&self, d: &Distance) -> bool {
        match &self.value {
            None => true,
            Some(r) => d.key <= r.key,
        }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            None => f.write_str("inf"),
            Some(d) => write!(f, "{d}"),
        }
    }
}

/// Distribution of the distance between the empirical and the true
/// distribution, as sorted `(distance key, cumulative probability)` pairs.
type DistanceCdf = Arc<Vec<(Rational, Rational)>>;

#[derive(Clone, PartialEq, Eq, Hash)]
enum CacheKey {
    Exact(Vec<Rational>, usize, Metric),
    MonteCarlo(Vec<Rational>, usize, Metric, usize, u64),
}

fn cache() -> &'static Mutex<HashMap<CacheKey, DistanceCdf>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, DistanceCdf>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn binomial(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// Number of ways to write `m` as an ordered sum of `s` nonnegative parts.
pub fn outcome_count(m: usize, s: usize) -> BigInt {
    if s == 0 {
        return BigInt::from(u8::from(m == 0));
    }
    binomial((m + s - 1) as u64, (s - 1) as u64)
}

/// Integer numerators of `probs` over their least common denominator.
fn common(probs: &[Rational]) -> (Vec<BigInt>, BigInt) {
    let den = probs.iter().fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
    (probs.iter().map(|p| p.numer() * (&den / p.denom())).collect(), den)
}

/// Exact key of the distance between counts `n` (out of `m`) and `a/den`,
/// scaled by `(m·den)` or its square.
fn scaled_key(counts: &[usize], a: &[BigInt], den: &BigInt, m: usize, metric: Metric) -> BigInt {
    let m = BigInt::from(m);
    let diffs = counts.iter().zip(a).map(|(&n, ai)| (BigInt::from(n) * den - &m * ai).abs());
    match metric {
        Metric::Linf => diffs.max().unwrap_or_else(BigInt::zero),
        Metric::L2 => diffs.map(|d| &d * &d).sum(),
    }
}

fn scale(m: usize, den: &BigInt, metric: Metric) -> BigInt {
    let s = BigInt::from(m) * den;
    match metric {
        Metric::Linf => s,
        Metric::L2 => &s * &s,
    }
}

fn to_cdf(mut weights: BTreeMap<BigInt, BigInt>, total: BigInt, scale: BigInt) -> Vec<(Rational, Rational)> {
    let mut acc = BigInt::zero();
    let mut out = Vec::with_capacity(weights.len());
    for (key, w) in std::mem::take(&mut weights) {
        acc += w;
        out.push((Rational::new(key, scale.clone()), Rational::new(acc.clone(), total.clone())));
    }
    out
}

fn exact_cdf(probs: &[Rational], m: usize, metric: Metric) -> DistanceCdf {
    let key = CacheKey::Exact(probs.to_vec(), m, metric);
    if let Some(c) = cache().lock().expect("cache lock").get(&key) {
        return c.clone();
    }
    let (a, den) = common(probs);
    let s = a.len();
    let powers: Vec<Vec<BigInt>> = a
        .iter()
        .map(|ai| {
            let mut v = vec![BigInt::one()];
            for j in 0..m {
                let next = &v[j] * ai;
                v.push(next);
            }
            v
        })
        .collect();
    let mut weights: BTreeMap<BigInt, BigInt> = BTreeMap::new();
    let mut counts = vec![0usize; s];
    // Enumerate compositions in lexicographic order, carrying the partial
    // product binom(remaining, n_i)·a_i^n_i along the way.
    fn rec(
        i: usize,
        remaining: usize,
        partial: BigInt,
        counts: &mut [usize],
        powers: &[Vec<BigInt>],
        emit: &mut dyn FnMut(&[usize], BigInt),
    ) {
        let s = counts.len();
        if i + 1 == s {
            counts[i] = remaining;
            emit(counts, partial * &powers[i][remaining]);
            return;
        }
        for n in 0..=remaining {
            counts[i] = n;
            let c = binomial(remaining as u64, n as u64) * &powers[i][n];
            rec(i + 1, remaining - n, &partial * c, counts, powers, emit);
        }
    }
    rec(0, m, BigInt::one(), &mut counts, &powers, &mut |c, w| {
        if !w.is_zero() {
            *weights.entry(scaled_key(c, &a, &den, m, metric)).or_insert_with(BigInt::zero) += w;
        }
    });
    let total = den.pow(m as u32);
    let cdf = Arc::new(to_cdf(weights, total, scale(m, &den, metric)));
    cache().lock().expect("cache lock").insert(key, cdf.clone());
    cdf
}

fn monte_carlo_cdf(probs: &[Rational], m: usize, metric: Metric, draws: usize, seed: u64) -> DistanceCdf {
    let key = CacheKey::MonteCarlo(probs.to_vec(), m, metric, draws, seed);
    if let Some(c) = cache().lock().expect("cache lock").get(&key) {
        return c.clone();
    }
    let (a, den) = common(probs);
    let cumulative: Vec<BigInt> = a
        .iter()
        .scan(BigInt::zero(), |acc, x| {
            *acc += x;
            Some(acc.clone())
        })
        .collect();
    let small = den.to_u64().map(|d| (d, cumulative.iter().map(|c| c.to_u64().unwrap_or(d)).collect::<Vec<_>>()));
    let float: Vec<f64> = probs.iter().scan(0.0, |acc, p| {
        *acc += to_f64(p);
        Some(*acc)
    })
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "radius-mc", 0));
    let mut weights: BTreeMap<BigInt, BigInt> = BTreeMap::new();
    let mut counts = vec![0usize; a.len()];
    for _ in 0..draws {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..m {
            let i = match &small {
                Some((d, cum)) => {
                    let x = rng.gen_range(0..*d);
                    cum.iter().position(|&c| x < c).unwrap_or(cum.len() - 1)
                }
                None => {
                    let x: f64 = rng.gen();
                    float.iter().position(|&c| x < c).unwrap_or(float.len() - 1)
                }
            };
            counts[i] += 1;
        }
        *weights.entry(scaled_key(&counts, &a, &den, m, metric)).or_insert_with(BigInt::zero) += 1;
    }
    let cdf = Arc::new(to_cdf(weights, BigInt::from(draws), scale(m, &den, metric)));
    cache().lock().expect("cache lock").insert(key, cdf.clone());
    cdf
}

fn check_alpha(alpha: &Rational) -> Result<(), StatError> {
    if alpha.is_negative() || *alpha > Rational::one() {
        return Err(StatError::BadAlpha(alpha.clone()));
    }
    Ok(())
}

/// Positive probabilities of the length-`k` traces of `h`, sorted.
fn support(h: &TraceDistVector) -> Result<Vec<Rational>, StatError> {
    let mass = h.mass_at(h.depth);
    if !mass.is_one() {
        return Err(StatError::MassNotAtDepth { depth: h.depth, mass });
    }
    let mut probs: Vec<Rational> =
        h.entries.iter().filter(|(t, p)| t.len() == h.depth && p.is_positive()).map(|(_, p)| p.clone()).collect();
    probs.sort();
    Ok(probs)
}

fn cdf_for(probs: &[Rational], m: usize, metric: Metric, method: Method) -> Result<(DistanceCdf, bool), StatError> {
    let count = outcome_count(m, probs.len());
    let feasible = count <= BigInt::from(EXACT_OUTCOME_CAP);
    match method {
        Method::Exact if !feasible => Err(StatError::TooManyOutcomes { count, cap: EXACT_OUTCOME_CAP }),
        Method::Exact => Ok((exact_cdf(probs, m, metric), false)),
        Method::Auto { .. } if feasible => Ok((exact_cdf(probs, m, metric), false)),
        Method::MonteCarlo { draws, seed } | Method::Auto { draws, seed } => {
            Ok((monte_carlo_cdf(probs, m, metric, draws, seed), true))
        }
    }
}

/// Smallest radius whose ball around `h` captures probability more than
/// `1 − α` of the frequencies of `m` independent draws from `h`.
pub fn radius(h: &TraceDistVector, m: usize, alpha: &Rational, metric: Metric, method: Method) -> Result<Radius, StatError> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(StatError::EmptySample);
    }
    let probs = support(h)?;
    let (cdf, approximate) = cdf_for(&probs, m, metric, method)?;
    let level = Rational::one() - alpha;
    let value = cdf.iter().find(|(_, c)| *c > level).map(|(k, _)| Distance::new(metric, k.clone()));
    Ok(Radius { value, approximate })
}

/// Probability that the frequencies of `m` draws from `h` lie within `r` of `h`.
pub fn coverage(h: &TraceDistVector, m: usize, r: &Distance, method: Method) -> Result<Rational, StatError> {
    let probs = support(h)?;
    let (cdf, _) = cdf_for(&probs, m, r.metric, method)?;
    Ok(cdf.iter().take_while(|(k, _)| *k <= r.key).last().map(|(_, c)| c.clone()).unwrap_or_else(Rational::zero))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acceptance {
    pub accepted: bool,
    pub distance: Distance,
    pub radius: Radius,
}

/// Whether `o` lies in the acceptance ball of the constant vector `(h, …, h)`.
pub fn accept_detailed(
    o: &Sample,
    h: &TraceDistVector,
    alpha: &Rational,
    metric: Metric,
    method: Method,
) -> Result<Acceptance, StatError> {
    if o.depth() != h.depth {
        return Err(StatError::DepthMismatch { expected: h.depth, found: o.depth() });
    }
    let e = expected(std::slice::from_ref(h), h.depth)?;
    let distance = distance(&freq(o), &e, metric);
    let radius = radius(h, o.width(), alpha, metric, method)?;
    Ok(Acceptance { accepted: radius.admits(&distance), distance, radius })
}

pub fn accept(o: &Sample, h: &TraceDistVector, alpha: &Rational, metric: Metric, method: Method) -> Result<bool, StatError> {
    accept_detailed(o, h, alpha, metric, method).map(|a| a.accepted)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatVerdict {
    pub verdict: Verdict,
    /// The accepting candidate, or the closest one when none accepts.
    pub candidate: TraceDistVector,
    pub acceptance: Acceptance,
    pub candidates: usize,
}

/// Candidate trace distributions for samples of `t` run against
/// implementations of `spec`: the deterministic-adversary vertices of the
/// composition whose mass lies entirely at the test depth, in the
/// specification's labels.
pub fn candidates(spec: &Pqts, t: &AnnotatedTest, cap: usize) -> Result<Vec<TraceDistVector>, StatError> {
    let k = t.depth();
    let product = compose(spec, &t.test)?;
    let view = |tr: &Trace| {
        Trace::new(tr.iter().map(|l| spec.signature().label_named(l.name()).expect("label of the specification")).collect())
    };
    let mut out: Vec<TraceDistVector> = vertices_capped(&product, k, false, cap)?
        .into_iter()
        .filter(|h| h.mass_at(k).is_one())
        .map(|h| TraceDistVector { depth: k, entries: h.entries.iter().map(|(t, p)| (view(t), p.clone())).collect() })
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// Pass iff the sample is acceptable for some candidate of [`candidates`].
pub fn statistical_verdict(
    o: &Sample,
    spec: &Pqts,
    t: &AnnotatedTest,
    alpha: &Rational,
    metric: Metric,
    method: Method,
) -> Result<StatVerdict, StatError> {
    if o.depth() != t.depth() {
        return Err(StatError::DepthMismatch { expected: t.depth(), found: o.depth() });
    }
    let cands = candidates(spec, t, DEFAULT_ADVERSARY_CAP)?;
    let mut best: Option<(TraceDistVector, Acceptance)> = None;
    for h in &cands {
        let a = accept_detailed(o, h, alpha, metric, method)?;
        let better = match &best {
            None => true,
            Some((_, b)) => (a.accepted && !b.accepted) || (a.accepted == b.accepted && a.distance.key < b.distance.key),
        };
        if better {
            best = Some((h.clone(), a));
        }
    }
    let (candidate, acceptance) = best.ok_or(StatError::NoCandidates)?;
    Ok(StatVerdict { verdict: Verdict::from_bool(acceptance.accepted), candidate, acceptance, candidates: cands.len() })
}

pub fn combined_verdict(output: Verdict, statistical: Verdict) -> Verdict {
    Verdict::from_bool(output.is_pass() && statistical.is_pass())
}
