use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use pqts::conformance::{
    check_ioco_with, check_pioco_with, check_td_inclusion_with, CheckOptions, ConformanceError, PrefixMode, Witness,
};
use pqts::model::{parse_pqts_unchecked, ParseError};
use pqts::rational::parse_rational;
use pqts::sched::{SchedError, TraceDistVector};
use pqts::stat::{combined_verdict, statistical_verdict, StatError};
use pqts::testgen::{generate_tests, run_test, ExternalSut, RunError, Target, TestgenError};
use pqts::{AnnotatedTest, Metric, Method, Pqts, Rational, Sample, Verdict};

/// Probabilistic model-based testing with quiescent transition systems.
#[derive(Parser)]
#[command(name = "pqts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model or test file for structural violations.
    Validate { path: PathBuf },
    /// Decide a conformance relation up to a depth bound.
    Check(CheckArgs),
    /// Generate annotated test cases from a specification.
    Gentest(GentestArgs),
    /// Execute a test and report the output verdict.
    Exec(RunArgs),
    /// Execute a test and write the observed sample.
    Sample(RunArgs),
    /// Compute the output, statistical and combined verdicts of a sample.
    Verdict(VerdictArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RelationArg {
    Ioco,
    Td,
    Pioco,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long = "impl")]
    imp: PathBuf,
    #[arg(long)]
    depth: usize,
    #[arg(long, value_enum, default_value = "pioco")]
    relation: RelationArg,
    /// Pin only length-k prefixes in the pioco side condition.
    #[arg(long)]
    exact_prefix: bool,
    #[arg(long)]
    cap_adversaries: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GentestArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output file, or a directory when `--count` is above 1.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    test: PathBuf,
    /// Model to simulate.
    #[arg(long = "impl", conflicts_with = "sut", required_unless_present = "sut")]
    imp: Option<PathBuf>,
    /// Shell command of an external system under test.
    #[arg(long)]
    sut: Option<String>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerdictArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    sample: PathBuf,
    #[arg(long, default_value = "1/20")]
    alpha: String,
    #[arg(long, default_value = "l2")]
    metric: Metric,
    /// `exact`, `mc:<N>` or `auto:<N>`.
    #[arg(long, default_value = "exact")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure { code: 2, message: message.to_string() }
}

fn cap(message: impl ToString) -> Failure {
    Failure { code: 3, message: message.to_string() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Pqts, Failure> {
    pqts::parse_pqts(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_test(path: &Path) -> Result<AnnotatedTest, Failure> {
    AnnotatedTest::parse(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, v: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(v).expect("serializable report");
    text.push('\n');
    emit(out, &text)
}

fn exit_for(v: Verdict) -> u8 {
    if v.is_pass() {
        0
    } else {
        1
    }
}

fn q(r: &Rational) -> Value {
    Value::String(r.to_string())
}

fn dist_json(h: &TraceDistVector) -> Value {
    let m: Map<String, Value> = h.entries.iter().map(|(t, p)| (t.to_string(), q(p))).collect();
    Value::Object(m)
}

fn conformance_failure(e: ConformanceError) -> Failure {
    if e.is_cap() {
        cap(e)
    } else {
        usage(e)
    }
}

fn stat_failure(e: StatError) -> Failure {
    match e {
        StatError::TooManyOutcomes { .. }
        | StatError::Sched(SchedError::AdversaryCapExceeded { .. } | SchedError::NodeCapExceeded { .. }) => cap(e),
        _ => usage(e),
    }
}

fn validate(path: &Path) -> Result<u8, Failure> {
    let text = read(path)?;
    let is_test = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).is_some_and(|l| l.starts_with("test"));
    if is_test {
        return match AnnotatedTest::parse(&text) {
            Ok(_) => {
                eprintln!("{}: valid test", path.display());
                Ok(0)
            }
            Err(TestgenError::Parse(ParseError::Invalid(vs))) => {
                for v in &vs {
                    println!("{v}");
                }
                Ok(1)
            }
            Err(TestgenError::InvalidTest(m)) => {
                println!("{m}");
                Ok(1)
            }
            Err(e) => Err(usage(format!("{}: {e}", path.display()))),
        };
    }
    let m = parse_pqts_unchecked(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let violations = m.validate();
    for v in &violations {
        println!("{v}");
    }
    eprintln!("{}: {} violation(s)", path.display(), violations.len());
    Ok(u8::from(!violations.is_empty()))
}

fn witness_json(w: &Witness) -> Value {
    match w {
        Witness::Output { trace, output } => json!({
            "kind": "output",
            "trace": trace.to_string(),
            "output": output.to_string(),
        }),
        Witness::Point { depth, point, facet, excess } => json!({
            "kind": "point",
            "depth": depth,
            "point": dist_json(point),
            "facet": {
                "terms": facet.terms.iter().map(|(t, c)| json!([t.to_string(), q(c)])).collect::<Vec<_>>(),
                "offset": q(&facet.offset),
            },
            "excess": q(excess),
        }),
    }
}

fn check(a: &CheckArgs) -> Result<u8, Failure> {
    let spec = load_model(&a.spec)?;
    let imp = load_model(&a.imp)?;
    let mut opts = CheckOptions::default();
    if a.exact_prefix {
        opts.prefix_mode = PrefixMode::ExactLength;
    }
    if let Some(c) = a.cap_adversaries {
        opts.adversary_cap = c;
    }
    let v = match a.relation {
        RelationArg::Ioco => check_ioco_with(&imp, &spec, a.depth, &opts),
        RelationArg::Td => check_td_inclusion_with(&imp, &spec, a.depth, &opts),
        RelationArg::Pioco => check_pioco_with(&imp, &spec, a.depth, &opts),
    }
    .map_err(conformance_failure)?;
    let verdict = Verdict::from_bool(v.passed());
    let report = json!({
        "relation": v.relation.to_string(),
        "depth": a.depth,
        "spec": spec.name(),
        "impl": imp.name(),
        "verdict": verdict.to_string(),
        "witness": v.witness.as_ref().map(witness_json),
    });
    eprintln!("{} {} {}: {verdict}", imp.name(), v.relation, spec.name());
    emit_json(a.out.as_deref(), &report)?;
    Ok(exit_for(verdict))
}

fn gentest(a: &GentestArgs) -> Result<u8, Failure> {
    let spec = load_model(&a.spec)?;
    let tests = generate_tests(&spec, a.depth, a.count, a.seed).map_err(usage)?;
    if a.count > 1 {
        let dir = a.out.as_deref().ok_or_else(|| usage("--out <dir> is required with --count above 1"))?;
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        for t in &tests {
            emit(Some(&dir.join(format!("{}.test", t.test.name()))), &t.to_text())?;
        }
    } else if let Some(t) = tests.first() {
        emit(a.out.as_deref(), &t.to_text())?;
    }
    eprintln!("generated {} test(s) of depth {}", tests.len(), a.depth);
    Ok(0)
}

fn execute(a: &RunArgs) -> Result<(AnnotatedTest, pqts::testgen::RunOutcome), Failure> {
    let t = load_test(&a.test)?;
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let run_failure = |e: RunError| usage(e);
    let outcome = match (&a.imp, &a.sut) {
        (Some(p), _) => {
            let imp = load_model(p)?;
            run_test(&t, Target::Simulated(&imp), a.runs, a.seed).map_err(run_failure)?
        }
        (None, Some(cmd)) => {
            let sut = ExternalSut { command: cmd.clone(), timeout: a.timeout_ms.map(Duration::from_millis) };
            run_test(&t, Target::External(&sut), a.runs, a.seed).map_err(run_failure)?
        }
        (None, None) => return Err(usage("one of --impl or --sut is required")),
    };
    Ok((t, outcome))
}

fn exec(a: &RunArgs) -> Result<u8, Failure> {
    let (t, o) = execute(a)?;
    let runs: Vec<Value> = o
        .sample
        .traces()
        .iter()
        .zip(&o.verdicts)
        .map(|(tr, v)| json!({ "trace": tr.to_string(), "verdict": v.to_string() }))
        .collect();
    let failed = o.verdicts.iter().filter(|v| !v.is_pass()).count();
    let report = json!({
        "test": t.test.name(),
        "runs": o.sample.width(),
        "depth": o.sample.depth(),
        "seed": a.seed,
        "failed_runs": failed,
        "output_verdict": o.output_verdict.to_string(),
        "traces": runs,
    });
    eprintln!("{} run(s), {failed} failed: output verdict {}", o.sample.width(), o.output_verdict);
    emit_json(a.out.as_deref(), &report)?;
    Ok(exit_for(o.output_verdict))
}

fn sample(a: &RunArgs) -> Result<u8, Failure> {
    let (_, o) = execute(a)?;
    emit(a.out.as_deref(), &o.sample.to_text())?;
    eprintln!("recorded {} trace(s) of length {}", o.sample.width(), o.sample.depth());
    Ok(0)
}

fn verdict(a: &VerdictArgs) -> Result<u8, Failure> {
    let spec = load_model(&a.spec)?;
    let t = load_test(&a.test)?;
    let o = Sample::parse(&read(&a.sample)?).map_err(|e| usage(format!("{}: {e}", a.sample.display())))?;
    let alpha = parse_rational(&a.alpha).map_err(|e| usage(format!("--alpha: {e}")))?;
    let mut output = Verdict::Pass;
    for tr in o.traces() {
        match t.verdict_of(tr) {
            Some(v) => output = combined_verdict(output, v),
            None => return Err(usage(format!("sample trace {tr} is not a complete trace of the test"))),
        }
    }
    let s = statistical_verdict(&o, &spec, &t, &alpha, a.metric, a.method.with_seed(a.seed)).map_err(stat_failure)?;
    let combined = combined_verdict(output, s.verdict);
    let report = json!({
        "alpha": q(&alpha),
        "metric": a.metric.to_string(),
        "runs": o.width(),
        "depth": o.depth(),
        "radius": s.acceptance.radius.to_string(),
        "radius_approximate": s.acceptance.radius.approximate,
        "distance": s.acceptance.distance.to_string(),
        "distance_value": s.acceptance.distance.to_f64(),
        "candidates": s.candidates,
        "candidate": dist_json(&s.candidate),
        "output_verdict": output.to_string(),
        "statistical_verdict": s.verdict.to_string(),
        "verdict": combined.to_string(),
    });
    eprintln!(
        "output {output}, statistical {} (distance {} vs radius {}): {combined}",
        s.verdict, s.acceptance.distance, s.acceptance.radius
    );
    emit_json(a.out.as_deref(), &report)?;
    Ok(exit_for(combined))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { path } => validate(path),
        Command::Check(a) => check(a),
        Command::Gentest(a) => gentest(a),
        Command::Exec(a) => exec(a),
        Command::Sample(a) => sample(a),
        Command::Verdict(a) => verdict(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
