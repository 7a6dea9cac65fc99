//! Machine-readable check records and deterministic, atomic file output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check_id: String,
    pub status: Status,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    /// The statement being checked.
    pub anchor: String,
}

impl CheckRecord {
    pub fn new(
        check_id: impl Into<String>,
        passed: bool,
        observed: f64,
        expected: f64,
        tolerance: f64,
        anchor: &str,
    ) -> Self {
        CheckRecord {
            check_id: check_id.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            observed,
            expected,
            tolerance,
            anchor: anchor.to_string(),
        }
    }

    pub fn indeterminate(mut self) -> Self {
        self.status = Status::Indeterminate;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suites: Vec<String>,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
}

impl Report {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn to_json_lines<T: Serialize>(values: &[T]) -> Result<String> {
    let mut out = String::new();
    for v in values {
        out.push_str(&serde_json::to_string(v).map_err(|e| Error::Io(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// CSV float formatting: 17 significant digits in scientific notation.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
