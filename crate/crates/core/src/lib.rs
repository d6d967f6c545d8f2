//! Probabilistic model-based testing with quiescent transition systems.

pub mod behavior;
pub mod conformance;
pub mod convex;
pub mod model;
pub mod random;
pub mod rational;
pub mod sched;
pub mod seed;
pub mod stat;
pub mod testgen;

pub use behavior::{Path, Trace};
pub use conformance::{check_ioco, check_pioco, check_td_inclusion, CheckOptions, ConformanceVerdict, PrefixMode, Witness};
pub use model::{parse_pqts, Label, Pqts, Signature};
pub use rational::{parse_rational, Rational};
pub use sched::{Adversary, TraceDistVector};
pub use stat::{Metric, Method, Sample};
pub use testgen::{AnnotatedTest, Verdict};
