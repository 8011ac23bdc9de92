use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Results of one run: a JSON summary plus named data files.
#[derive(Debug)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub results: Map<String, Value>,
    pub files: Vec<(String, String)>,
}

pub fn config_hash(effective: &str) -> String {
    hex::encode(Sha256::digest(effective.as_bytes()))
}

impl Report {
    pub fn new(command: &str, effective: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(effective),
            seed,
            results: Map::new(),
            files: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialise");
        self.results.insert(key.to_string(), v);
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn summary_json(&self) -> String {
        let mut top = Map::new();
        top.insert("tool".into(), Value::from("coarsekit"));
        top.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        top.insert("command".into(), Value::from(self.command.clone()));
        top.insert("config_hash".into(), Value::from(self.config_hash.clone()));
        top.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        top.insert("results".into(), Value::Object(self.results.clone()));
        let mut s = serde_json::to_string_pretty(&Value::Object(top)).expect("plain data");
        s.push('\n');
        s
    }
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Config(format!("cannot write to {}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", target.display())))?;
    tmp.persist(&target)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", target.display())))?;
    Ok(target)
}

/// Writes `report.json` and every data file into `dir`, each atomically.
pub fn emit_report(report: &Report, dir: &Path) -> CliResult<Vec<PathBuf>> {
    if report.results.is_empty() && report.files.is_empty() {
        return Err(CliError::Precondition("no results to report".into()));
    }
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    let mut written = vec![write_atomic(dir, "report.json", &report.summary_json())?];
    for (name, contents) in &report.files {
        written.push(write_atomic(dir, name, contents)?);
    }
    Ok(written)
}
