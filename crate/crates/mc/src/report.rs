//! Report envelopes and atomic file output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{McError, Result};

pub const SCHEMA: &str = "schatten-mc/1";

/// Everything needed to re-run the command that produced a report.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub command: String,
    /// Full argument vector, program name excluded.
    pub argv: Vec<String>,
    pub version: &'static str,
    pub seed: u64,
    /// Every option after defaults were applied.
    pub config: Value,
    pub outputs: Vec<String>,
    /// Wall-clock duration; the only field that varies between identical runs.
    pub wall_ms: f64,
}

impl Manifest {
    pub fn new(command: &str, argv: &[String], seed: u64, config: Value) -> Self {
        Manifest {
            schema: SCHEMA,
            command: command.to_owned(),
            argv: argv.to_vec(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            outputs: Vec::new(),
            wall_ms: 0.0,
        }
    }
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| McError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| McError::io(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| McError::io(dir, e))
}

/// Renders rows as CSV with a header row.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
