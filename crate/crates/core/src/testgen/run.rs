use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, TryRecvError};
use std::thread;
use std::time::Duration;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{compose_with_pairs, AnnotatedTest, TestgenError, Verdict};
use crate::behavior::Trace;
use crate::model::{Distribution, Label, Pqts};
use crate::seed::{derive_seed, mix};
use crate::stat::Sample;

/// What a test is executed against.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// A model, executed by sampling its distributions.
    Simulated(&'a Pqts),
    /// A process speaking the line protocol on standard input and output.
    External(&'a ExternalSut),
}

/// An external system under test. One process is started per run and
/// receives `RESET` as its first line; afterwards stimuli are sent as bare
/// action names and outputs are read back one per line. Silence for
/// `timeout` is observed as quiescence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSut {
    pub command: String,
    pub timeout: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub sample: Sample,
    /// Annotation of each run's trace, in run order.
    pub verdicts: Vec<Verdict>,
    pub output_verdict: Verdict,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("at least one run is required")]
    ZeroRuns,
    #[error("external SUT needs a quiescence timeout")]
    MissingTimeout,
    #[error("the test's signature is not the mirror of the target's")]
    SignatureMismatch,
    #[error("run {run}: trace {trace} is not a complete trace of the test (is the test depth-uniform?)")]
    NotDepthUniform { run: usize, trace: String },
    #[error("run {run}: protocol violation: {message}")]
    Protocol { run: usize, message: String },
    #[error("run {run}: {source}")]
    Io { run: usize, source: std::io::Error },
    #[error(transparent)]
    Testgen(#[from] TestgenError),
}

/// Executes `t` `m` times against `target`. Run `r` samples with a seed
/// derived from `(seed, r)`; nondeterminism left in a simulated target is
/// resolved by one history-dependent scheduler fixed for the whole call.
pub fn run_test(t: &AnnotatedTest, target: Target<'_>, m: usize, seed: u64) -> Result<RunOutcome, RunError> {
    if m == 0 {
        return Err(RunError::ZeroRuns);
    }
    let depth = t.depth();
    let traces = match target {
        Target::Simulated(imp) => simulate(t, imp, m, seed)?,
        Target::External(sut) => {
            let timeout = sut.timeout.ok_or(RunError::MissingTimeout)?;
            (0..m).map(|r| external_run(t, &sut.command, timeout, r)).collect::<Result<_, _>>()?
        }
    };
    let mut verdicts = Vec::with_capacity(m);
    for (run, trace) in traces.iter().enumerate() {
        let v = t
            .verdict_of(trace)
            .ok_or_else(|| RunError::NotDepthUniform { run, trace: trace.to_string() })?;
        verdicts.push(v);
    }
    let output_verdict = Verdict::from_bool(verdicts.iter().all(|v| v.is_pass()));
    let sample = Sample::new(depth, traces).map_err(|e| RunError::NotDepthUniform { run: 0, trace: e.to_string() })?;
    Ok(RunOutcome { sample, verdicts, output_verdict })
}

fn simulate(t: &AnnotatedTest, imp: &Pqts, m: usize, seed: u64) -> Result<Vec<Trace>, RunError> {
    if t.test.signature() != &imp.signature().mirrored() {
        return Err(RunError::SignatureMismatch);
    }
    let (product, pairs) = compose_with_pairs(imp, &t.test)?;
    let stimuli: BTreeSet<&str> = t.test.signature().output_names().collect();
    let depth = t.depth();
    let sched_seed = derive_seed(seed, "scheduler", 0);
    let view = |l: &Label| imp.signature().label_named(l.name()).expect("label of the implementation");

    let mut out = Vec::with_capacity(m);
    for run in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "run", run as u64));
        let mut state = product.initial();
        let mut trace = Trace::empty();
        let mut history: Vec<u64> = vec![state as u64];
        loop {
            let mut options: Vec<&Distribution> =
                product.transitions_from(state).iter().map(|&i| &product.transition(i).dist).collect();
            let accepted = options.iter().any(|d| d.outcomes().iter().any(|o| stimuli.contains(o.label.name())));
            if accepted {
                options.retain(|d| !d.outcomes().iter().all(|o| o.label.is_delta()));
            }
            if options.is_empty() {
                break;
            }
            let pick = (mix(sched_seed, history.iter().copied()) % options.len() as u64) as usize;
            let dist = options[pick];
            let k = sample_outcome(dist, &mut rng);
            let o = &dist.outcomes()[k];
            trace.push(view(&o.label));
            state = o.target;
            history.push(pick as u64);
            history.push(k as u64);
        }
        // Pad with quiescence along the test's delta edges.
        let mut node = pairs[state].1;
        while trace.len() < depth {
            let next = t.test.transitions_from(node).iter().find_map(|&i| {
                let o = &t.test.transition(i).dist.outcomes()[0];
                o.label.is_delta().then_some(o.target)
            });
            match next {
                Some(n) => {
                    node = n;
                    trace.push(Label::delta());
                }
                None => break,
            }
        }
        out.push(trace);
    }
    Ok(out)
}

/// Draws an outcome index with exact rational weights.
fn sample_outcome(d: &Distribution, rng: &mut ChaCha8Rng) -> usize {
    let outcomes = d.outcomes();
    if outcomes.len() == 1 {
        return 0;
    }
    let den = outcomes.iter().fold(BigInt::one(), |acc, o| acc.lcm(o.prob.denom()));
    let nums: Vec<BigInt> = outcomes.iter().map(|o| o.prob.numer() * (&den / o.prob.denom())).collect();
    let draw: BigInt = match den.to_u64() {
        Some(d) => BigInt::from(rng.gen_range(0..d)),
        None => {
            let x: f64 = rng.gen();
            BigInt::from((x * den.to_f64().unwrap_or(f64::MAX)) as u128)
        }
    };
    let mut acc = BigInt::from(0);
    for (i, n) in nums.iter().enumerate() {
        acc += n;
        if draw < acc {
            return i;
        }
    }
    outcomes.len() - 1
}

struct Session {
    child: Child,
    lines: Receiver<String>,
    reader: Option<thread::JoinHandle<()>>,
}

impl Session {
    fn start(command: &str, run: usize) -> Result<Self, RunError> {
        let io = |source| RunError::Io { run, source };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(io)?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        let reader = thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut s = Session { child, lines: rx, reader: Some(reader) };
        s.send("RESET").map_err(io)?;
        Ok(s)
    }

    fn send(&mut self, line: &str) -> std::io::Result<()> {
        let stdin = self.child.stdin.as_mut().expect("piped stdin");
        writeln!(stdin, "{line}")?;
        stdin.flush()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        drop(self.child.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
    }
}

fn external_run(t: &AnnotatedTest, command: &str, timeout: Duration, run: usize) -> Result<Trace, RunError> {
    let test = &t.test;
    let mut session = Session::start(command, run)?;
    let mut node = test.initial();
    let mut trace = Trace::empty();
    let edge = |node: usize, pred: &dyn Fn(&Label) -> bool| {
        test.transitions_from(node).iter().find_map(|&i| {
            let o = &test.transition(i).dist.outcomes()[0];
            pred(&o.label).then(|| (o.label.clone(), o.target))
        })
    };
    loop {
        if test.transitions_from(node).is_empty() {
            break;
        }
        let stimulus = edge(node, &|l: &Label| l.is_output());
        let received = match &stimulus {
            Some(_) => match session.lines.try_recv() {
                Ok(line) => Some(line),
                Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => None,
            },
            None => match session.lines.recv_timeout(timeout) {
                Ok(line) => Some(line),
                Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => None,
            },
        };
        let (label, next) = match (received, stimulus) {
            (Some(line), _) => {
                let token = line.trim().to_string();
                edge(node, &|l: &Label| l.is_input() && l.name() == token).ok_or_else(|| RunError::Protocol {
                    run,
                    message: format!("unexpected output token `{token}`"),
                })?
            }
            (None, Some((label, next))) => {
                // A process that already exited cannot read; the stimulus is still offered.
                let _ = session.send(label.name());
                (label, next)
            }
            (None, None) => edge(node, &Label::is_delta).ok_or_else(|| RunError::Protocol {
                run,
                message: "the test cannot observe quiescence here".into(),
            })?,
        };
        trace.push(label.mirrored());
        node = next;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_pqts;
    use crate::testgen::annotate;

    fn spec() -> Pqts {
        parse_pqts(
            "pqts s\ninputs: go?\noutputs: x!, y!\nstates: s0 init, s1, s2\n\
             trans s0: { go? 1 -> s1 }\ntrans s0: { delta 1 -> s0 }\ntrans s1: { x! 1/2 -> s2, y! 1/2 -> s2 }\n\
             trans s1: { go? 1 -> s1 }\ntrans s2: { go? 1 -> s2 }\ntrans s2: { delta 1 -> s2 }\n",
        )
        .unwrap()
    }

    fn test() -> AnnotatedTest {
        let t = parse_pqts(
            "pqts t\ninputs: x?, y?\noutputs: go!\nstates: t0 init, t1, t2, t3, t4, t5, t6, t7, t8, t9, t10, t11, t12\n\
             trans t0: { go! 1 -> t1 }\ntrans t0: { x? 1 -> t2 }\ntrans t0: { y? 1 -> t3 }\ntrans t0: { delta 1 -> t4 }\n\
             trans t1: { x? 1 -> t5 }\ntrans t1: { y? 1 -> t6 }\ntrans t1: { delta 1 -> t7 }\n\
             trans t4: { x? 1 -> t8 }\ntrans t4: { y? 1 -> t9 }\ntrans t4: { delta 1 -> t10 }\n\
             trans t2: { delta 1 -> t11 }\ntrans t3: { delta 1 -> t12 }\n",
        )
        .unwrap();
        annotate(&spec(), &t).unwrap()
    }

    #[test]
    fn simulation_is_reproducible() {
        let a = run_test(&test(), Target::Simulated(&spec()), 20, 3).unwrap();
        let b = run_test(&test(), Target::Simulated(&spec()), 20, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.output_verdict, Verdict::Pass);
        // The stimulus is accepted at the root, so joint quiescence is never chosen there.
        assert!(a.sample.traces().iter().all(|t| t.first() == Some(&Label::input("go"))));
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(matches!(run_test(&test(), Target::Simulated(&spec()), 0, 0), Err(RunError::ZeroRuns)));
    }

    #[test]
    fn external_requires_timeout() {
        let sut = ExternalSut { command: "cat".into(), timeout: None };
        assert!(matches!(run_test(&test(), Target::External(&sut), 1, 0), Err(RunError::MissingTimeout)));
    }
}
