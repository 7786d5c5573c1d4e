//! Inputs shared by the benchmarks.

use std::path::PathBuf;

/// `(name, plan text)` for every checked-in fixture plan, sorted by name.
pub fn fixture_plans() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/plans");
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .filter_map(|e| {
            let path = e.ok()?.path();
            (path.extension()? == "json").then_some(())?;
            let name = path.file_stem()?.to_string_lossy().into_owned();
            Some((name, std::fs::read_to_string(&path).ok()?))
        })
        .collect();
    out.sort();
    out
}

pub const QUESTIONS: [&str; 5] = [
    "What is a hash semi join?",
    "How many tuples left after Step 5?",
    "Which operators does this plan use?",
    "How long did step 3 take?",
    "What is the most expensive operation?",
];
