//! Shared inputs for the benchmarks.

use std::path::{Path, PathBuf};

use relaxflow::case_io;
use relaxflow::Network;

/// Cases bundled with the core crate, smallest first.
pub const CASES: [&str; 5] = ["case2", "case3", "case5", "case14", "case30"];

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(format!("{name}.m"))
}

/// Loads a bundled case; panics if it is missing or invalid.
pub fn fixture(name: &str) -> Network {
    case_io::load(&fixture_path(name), None).unwrap_or_else(|e| panic!("{name}: {e}"))
}
