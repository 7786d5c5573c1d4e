//! Narrations of every fixture plan against checked-in golden files.
//! Run with `UPDATE_GOLDEN=1` to rewrite them.

use std::fs;
use std::path::{Path, PathBuf};

use qep_core::{PlanContext, PlanSource, TemplateSet};

fn fixtures() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/plans");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
}

fn narrate(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let ctx = PlanContext::from_json_text(text, PlanSource::File, &TemplateSet::shipped()).unwrap();
    ctx.script.to_text()
}

#[test]
fn narrations_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden");
    let mut mismatches = Vec::new();
    for path in fixtures() {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let golden = golden_dir.join(format!("{name}.txt"));
        let actual = narrate(&path);
        if update {
            fs::write(&golden, &actual).unwrap();
            continue;
        }
        let expected = fs::read_to_string(&golden).unwrap_or_default();
        if expected != actual {
            mismatches.push(format!("{name}:\n--- expected\n{expected}--- actual\n{actual}"));
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn narration_is_stable_across_runs() {
    for path in fixtures() {
        assert_eq!(narrate(&path), narrate(&path), "{}", path.display());
    }
}
