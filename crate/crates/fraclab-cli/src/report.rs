//! Report envelope and file writers.
//!
//! A report is pretty-printed JSON with fields in declaration order and no
//! timestamps or host data, so equal inputs give byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fraclab::fracops::Trajectory;
use serde::Serialize;
use serde_json::Value;

use crate::error::{io, CliError};

/// Bumped whenever a field of the envelope changes meaning.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "fraclab";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// At least one asserted check failed.
    CheckFailed,
    /// The computation stopped with an error.
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::CheckFailed | Self::Error => 1,
        }
    }
}

/// One asserted comparison `value <relation> limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub relation: &'static str,
    pub limit: f64,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value <= limit, value, relation: "<=", limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value >= limit, value, relation: ">=", limit }
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value < limit, value, relation: "<", limit }
    }

    /// A boolean property; `value` is 1 when it holds.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), passed: ok, value: if ok { 1.0 } else { 0.0 }, relation: "==", limit: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub status: Status,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    /// Names of the CSV files written next to the report.
    pub files: Vec<String>,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: TOOL,
            version: fraclab::VERSION,
            command: command.to_string(),
            seed,
            config,
            status: Status::Ok,
            checks: Vec::new(),
            error: None,
            files: Vec::new(),
            result: Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report values serialize");
        s.push('\n');
        s
    }
}

/// Numeric columns for a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Columns `t, re_0, im_0, re_1, im_1, …`.
    pub fn trajectory(traj: &Trajectory) -> Self {
        let mut header = vec!["t".to_string()];
        for k in 0..traj.dim() {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        let rows = traj
            .grid
            .nodes
            .iter()
            .zip(&traj.values)
            .map(|(t, v)| {
                let mut r = Vec::with_capacity(1 + 2 * v.len());
                r.push(*t);
                for z in v.iter() {
                    r.push(z.re);
                    r.push(z.im);
                }
                r
            })
            .collect();
        Self { header, rows }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| io(path.display(), e))?;
        w.write_record(&self.header).map_err(|e| io(path.display(), e))?;
        for row in &self.rows {
            // shortest round-trip representation, locale independent
            w.write_record(row.iter().map(|x| x.to_string())).map_err(|e| io(path.display(), e))?;
        }
        w.flush().map_err(|e| io(path.display(), e))
    }
}

/// Creates `dir` if needed and proves it writable with a probe file.
pub fn ensure_writable(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io(format!("cannot create {}", dir.display()), e))?;
    let probe = dir.join(".fraclab-write-probe");
    let res = fs::File::create(&probe).and_then(|mut f| f.write_all(b"ok"));
    let _ = fs::remove_file(&probe);
    res.map_err(|e| io(format!("output directory {} is not writable", dir.display()), e))
}

/// Writes through a temporary file and a rename, so a reader never sees a
/// half-written report.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp: PathBuf = path.with_extension("json.tmp");
    fs::write(&tmp, contents).map_err(|e| io(tmp.display(), e))?;
    fs::rename(&tmp, path).map_err(|e| io(path.display(), e))
}
