//! Report files and CSV writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use spincm_core::VerificationReport;

use crate::exit::{io_failure, Failure};

pub const SCHEMA_VERSION: u32 = 1;
pub const GIT_HASH: &str = env!("SPINCM_GIT_HASH");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the parts of a report that do not depend on floating-point
/// detail: check names, tolerances and pass flags, one line per check.
pub fn skeleton_digest(report: &VerificationReport) -> String {
    let mut text = String::new();
    for c in &report.checks {
        text.push_str(&format!("{}\t{:e}\t{}\n", c.name, c.tolerance, c.passed));
    }
    text.push_str(&format!("passed\t{}\n", report.passed));
    sha256_hex(text.as_bytes())
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// `<out>.report.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

/// Renders the report document. `config_digest` identifies the inputs (state
/// file text plus normalized arguments).
pub fn report_json(command: &str, config_digest: &str, report: &VerificationReport) -> String {
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "residual": number(c.residual),
                "tolerance": number(c.tolerance),
                "passed": c.passed,
            })
        })
        .collect();
    let details: Map<String, Value> = report
        .metadata
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "passed": report.passed,
        "checks": checks,
        "metadata": {
            "git_hash": GIT_HASH,
            "config_digest": config_digest,
            "skeleton_digest": skeleton_digest(report),
            "details": details,
        },
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, Failure> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(|e| io_failure(path, e))
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column names `prefix_i` (1-based) and `prefix_i_alpha` for `n x nc` blocks.
pub fn vector_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

pub fn matrix_columns(prefix: &str, n: usize, nc: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).flat_map(move |i| (1..=nc).map(move |al| format!("{prefix}_{i}_{al}")))
}
