//! Run reports, artifact files and the manifest.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::plan::Plan;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONSTANTS_FILE: &str = "constants.json";
pub const SERIES_FILE: &str = "series.csv";
pub const REPORT_FILE: &str = "report.json";

/// One named measurement against its threshold. Hard checks fail the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub hard: bool,
}

impl Check {
    /// Passes when `value < threshold`.
    pub fn below(name: impl Into<String>, value: f64, threshold: f64, hard: bool) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold, hard }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: impl Into<String>, value: f64, threshold: f64, hard: bool) -> Self {
        Self { name: name.into(), value, threshold, passed: value > threshold, hard }
    }

    /// Passes when `value == expected`.
    pub fn equals(name: impl Into<String>, value: f64, expected: f64, hard: bool) -> Self {
        Self { name: name.into(), value, threshold: expected, passed: value == expected, hard }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub lambda: f64,
    pub mu0: f64,
    /// Size of the neglected interaction in the initial data; zero for exact data.
    pub preparation_error: f64,
    pub checks: Vec<Check>,
    pub details: serde_json::Value,
}

impl RunReport {
    pub fn hard_failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.hard && !c.passed).collect()
    }
}

/// Everything a run writes besides the manifest.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub constants_json: String,
    pub series_csv: String,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub plan: Plan,
    /// SHA-256 of each artifact file.
    pub sha256: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the artifacts and a manifest with their hashes into `cfg.output_dir`.
pub fn write_artifacts(cfg: &ExperimentConfig, plan: &Plan, a: &Artifacts) -> Result<Manifest> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let report = serde_json::to_string_pretty(&a.report).context("serializing report")?;
    let mut sha256 = BTreeMap::new();
    for (name, body) in [(CONSTANTS_FILE, &a.constants_json), (SERIES_FILE, &a.series_csv), (REPORT_FILE, &report)] {
        write(dir, name, body)?;
        sha256.insert(name.to_string(), sha256_hex(body.as_bytes()));
    }
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        plan: plan.clone(),
        sha256,
    };
    write(dir, MANIFEST_FILE, &serde_json::to_string_pretty(&manifest).context("serializing manifest")?)?;
    Ok(manifest)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

/// CSV text from a header and numeric rows.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
