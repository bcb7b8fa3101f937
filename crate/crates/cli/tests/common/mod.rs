//! Shared helpers for the CLI integration and acceptance suites.

#![allow(dead_code)]

use fairwash_core::dataspace::{synth_generate, write_csv};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairwash"))
}

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

/// Path to an optional user-downloaded dataset (`data/<name>.csv` under the
/// workspace root, overridable via FAIRWASH_DATA_DIR).
pub fn dataset_path(name: &str) -> PathBuf {
    let dir = std::env::var_os("FAIRWASH_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data"));
    dir.join(format!("{name}.csv"))
}

pub fn schema_path(name: &str) -> PathBuf {
    workspace_root().join("schemas").join(format!("{name}.json"))
}

/// A synthetic-fixture schema matching `synth_generate`'s column layout.
pub fn synth_schema_json(n_features: usize) -> String {
    let mut columns: Vec<String> = (0..n_features)
        .map(|j| format!(r#"{{ "name": "f{j}", "kind": "binary" }}"#))
        .collect();
    columns.push(r#"{ "name": "label", "kind": "binary" }"#.into());
    columns.push(r#"{ "name": "group", "kind": "binary" }"#.into());
    format!(
        r#"{{
  "columns": [{}],
  "label_column": "label",
  "positive_label": "1",
  "group_column": "group",
  "protected_value": "0"
}}"#,
        columns.join(", ")
    )
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
    pub out: PathBuf,
}

/// Writes a synthetic dataset, its schema and a config under a temp dir.
/// `config_overrides` is merged over the base config object.
pub fn fixture(
    n: usize,
    n_features: usize,
    bias: f64,
    seed: u64,
    config_overrides: serde_json::Value,
) -> Fixture {
    let dir = tempfile::tempdir().expect("tempdir");
    let data_path = dir.path().join("data.csv");
    let schema_file = dir.path().join("schema.json");
    let config_path = dir.path().join("config.json");
    let out = dir.path().join("run");

    let data = synth_generate(n, n_features, bias, seed);
    write_csv(&data, &data_path).expect("write dataset");
    std::fs::write(&schema_file, synth_schema_json(n_features)).expect("write schema");

    let mut config = serde_json::json!({
        "dataset": data_path,
        "schema": schema_file,
        "split": { "ratios": [0.67, 0.165, 0.165], "seed": 42, "n_resamples": 3 },
        "blackbox": {
            "families": ["adaboost", "gbt"],
            "search_iterations": 2,
            "seed": 7,
            "target": "gbt",
            "validation_fraction": 0.2
        },
        "epsilon": { "values": [0.05, 0.2, 0.6, 1.0] },
        "metric": "sp"
    });
    merge(&mut config, config_overrides);
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap())
        .expect("write config");
    Fixture {
        dir,
        config: config_path,
        out,
    }
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn run_ok(fx: &Fixture, subcommand: &str, extra: &[&str]) -> Output {
    let output = bin()
        .arg(subcommand)
        .arg("--config")
        .arg(&fx.config)
        .arg("--out")
        .arg(&fx.out)
        .args(extra)
        .output()
        .expect("spawn fairwash");
    assert!(
        output.status.success(),
        "{subcommand} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// All regular files under a directory (relative paths), manifests excluded
/// since their timestamps legitimately differ between runs.
pub fn artifact_files(root: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    fn walk(dir: &Path, root: &Path, files: &mut Vec<PathBuf>) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                walk(&path, root, files);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                let name = rel.file_name().unwrap().to_string_lossy().to_string();
                if !name.starts_with("manifest_") {
                    files.push(rel);
                }
            }
        }
    }
    walk(root, root, &mut files);
    files.sort();
    files
}

/// Subset of sweep CSV columns used by the test-side oracles.
pub fn read_sweep_points(path: &Path) -> Vec<(f64, f64, f64, bool)> {
    let mut reader = csv::Reader::from_path(path).expect("read sweep");
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.unwrap();
        let parse = |i: usize| record.get(i).unwrap().parse::<f64>();
        if let (Ok(eps), Ok(fid), Ok(unf)) = (parse(0), parse(1), parse(2)) {
            rows.push((eps, fid, unf, record.get(6) == Some("true")));
        }
    }
    rows
}
