//! Shared inputs for the benchmarks.

use pqts::Pqts;

/// Loads one of the bundled models by file name.
pub fn model(name: &str) -> Pqts {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    pqts::parse_pqts(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}
