//! Every checked-in run recipe must parse against the current schema and
//! execute to a successful, non-empty table.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

const SUBCOMMANDS: &[&str] = &["walk", "sweep-t", "disorder", "brems", "mirrors", "lemma"];

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config_paths() -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .expect("configs directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no recipes found");
    paths
}

/// The single subcommand table a recipe is written for.
fn subcommand_of(value: &toml::Value, path: &Path) -> &'static str {
    let table = value.as_table().expect("top-level table");
    let found: Vec<&'static str> = SUBCOMMANDS
        .iter()
        .copied()
        .filter(|name| table.contains_key(*name))
        .collect();
    assert_eq!(
        found.len(),
        1,
        "{} must configure exactly one subcommand, found {:?}",
        path.display(),
        found
    );
    found[0]
}

#[test]
fn recipes_parse_with_current_schema() {
    for path in config_paths() {
        let text = std::fs::read_to_string(&path).unwrap();
        let value: toml::Value = toml::from_str(&text)
            .unwrap_or_else(|e| panic!("{} does not parse: {e}", path.display()));
        assert_eq!(
            value.get("schema").and_then(|v| v.as_integer()),
            Some(1),
            "{} missing schema = 1",
            path.display()
        );
        subcommand_of(&value, &path);
    }
}

#[test]
fn recipes_run_to_completion() {
    let mut seen = BTreeSet::new();
    for path in config_paths() {
        let text = std::fs::read_to_string(&path).unwrap();
        let value: toml::Value = toml::from_str(&text).unwrap();
        let sub = subcommand_of(&value, &path);
        seen.insert(sub);

        let out = std::env::temp_dir().join(format!(
            "recipe_{}.csv",
            path.file_stem().unwrap().to_string_lossy()
        ));
        let status = Command::new(env!("CARGO_BIN_EXE_entlab"))
            .arg(sub)
            .arg("--config")
            .arg(&path)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("spawn");
        assert!(
            status.status.success(),
            "{} exited with {:?}: {}",
            path.display(),
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        );

        let table = std::fs::read_to_string(&out).unwrap();
        let mut lines = table.lines();
        let header = lines.next().unwrap_or_default();
        assert!(
            header.contains(',') && lines.next().is_some(),
            "{} produced no data rows",
            path.display()
        );
        std::fs::remove_file(&out).ok();
    }
    assert_eq!(
        seen.len(),
        SUBCOMMANDS.len(),
        "recipes leave subcommands uncovered: have {seen:?}"
    );
}
