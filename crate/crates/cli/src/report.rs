use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_bytes(path: &Path, bytes: &[u8]) -> Self {
        Self { path: path.display().to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) }
    }

    pub fn of_file(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::of_bytes(path, &bytes))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// The single JSON document every successful command prints.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub command: String,
    pub seed: u64,
    pub parameters: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall time per stage, microseconds.
    pub timings_us: BTreeMap<String, u64>,
    pub counters: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub results: Map<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

/// A thresholded numeric check; any failure makes the command exit 4.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `<= 1e-3`.
    pub rule: String,
    pub passed: bool,
}

impl PipelineReport {
    pub fn new(command: &str, seed: u64, parameters: Value) -> Self {
        Self {
            command: command.to_string(),
            seed,
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_us: BTreeMap::new(),
            counters: BTreeMap::new(),
            results: Map::new(),
            checks: Vec::new(),
        }
    }

    /// Runs `f`, recording its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings_us.entry(stage.to_string()).or_default() += start.elapsed().as_micros() as u64;
        out
    }

    pub fn count(&mut self, name: &str, n: u64) {
        *self.counters.entry(name.to_string()).or_default() += n;
    }

    pub fn check(&mut self, name: &str, value: f64, rule: impl Into<String>, passed: bool) {
        self.checks.push(Check { name: name.to_string(), value, rule: rule.into(), passed });
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn result(&mut self, name: &str, value: impl Into<Value>) {
        self.results.insert(name.to_string(), value.into());
    }
}
