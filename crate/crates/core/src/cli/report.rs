//! Versioned JSON reports, headline CSVs and plot series.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "warpconv-report/1";

/// One tolerance comparison. `value` is absent for checks that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when value < tolerance.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance: Some(tolerance),
            passed: value < tolerance,
            detail: None,
        }
    }

    /// Passes when value ≤ tolerance.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance: Some(tolerance),
            passed: value <= tolerance,
            detail: None,
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), value: None, tolerance: None, passed, detail: Some(detail.into()) }
    }

    /// A numerical failure raised while computing the quantity.
    pub fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self::flag(name, false, err.to_string())
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}/{}", self.name);
        self
    }
}

/// A convergence sequence for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<[f64; 2]>,
}

/// The hashed part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub schema: String,
    pub study: String,
    pub version: String,
    pub convention: String,
    pub parameters: Value,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Value>,
    pub series: Vec<Series>,
    pub passed: bool,
}

/// Wall-clock data, excluded from the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub started_unix_s: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(flatten)]
    pub body: ReportBody,
    pub body_sha256: String,
    pub run: RunInfo,
}

impl ReportBody {
    pub fn new(study: &str, parameters: Value) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            study: study.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            convention: crate::grid::CONVENTION_TAG.to_string(),
            parameters,
            checks: Vec::new(),
            tables: BTreeMap::new(),
            series: Vec::new(),
            passed: true,
        }
    }

    pub fn finish(mut self, run: RunInfo) -> Report {
        self.passed = self.checks.iter().all(|c| c.passed);
        let digest = Sha256::digest(serde_json::to_vec(&self).expect("report body serializes"));
        let body_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Report { body: self, body_sha256, run }
    }
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.body.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per check: name, value, tolerance, passed.
    pub fn headline_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "value", "tolerance", "passed"]).map_err(csv_err)?;
        for c in &self.body.checks {
            w.write_record([
                c.name.clone(),
                c.value.map(|v| format!("{v:e}")).unwrap_or_default(),
                c.tolerance.map(|v| format!("{v:e}")).unwrap_or_default(),
                c.passed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        into_string(w)
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`, each via a temporary file and a rename.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        write_atomic(&json, self.to_json().as_bytes())?;
        write_atomic(&csv, self.headline_csv()?.as_bytes())?;
        Ok((json, csv))
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name =
        path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Two-column CSV of one series of a report, or of the first when `name` is `None`.
/// A report without series yields the header `x,y` alone.
pub fn plot_data(report: &Value, name: Option<&str>) -> Result<String> {
    let schema = report.get("schema").and_then(Value::as_str).unwrap_or("<missing>");
    if schema != SCHEMA {
        return Err(Error::UnknownSchema(schema.to_string()));
    }
    let series: Vec<Series> = match report.get("series") {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => serde_json::from_value(v.clone())?,
    };
    let chosen = match name {
        Some(n) => Some(
            series
                .iter()
                .find(|s| s.name == n)
                .ok_or_else(|| Error::InvalidArgument(format!("report has no series {n:?}")))?,
        ),
        None => series.first(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    match chosen {
        None => w.write_record(["x", "y"]).map_err(csv_err)?,
        Some(s) => {
            w.write_record([s.x_label.as_str(), s.y_label.as_str()]).map_err(csv_err)?;
            for p in &s.points {
                w.write_record([format!("{:e}", p[0]), format!("{:e}", p[1])]).map_err(csv_err)?;
            }
        }
    }
    into_string(w)
}

/// Names of the series in a report.
pub fn series_names(report: &Value) -> Vec<String> {
    report
        .get("series")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|s| s.get("name").and_then(Value::as_str).map(String::from)).collect())
        .unwrap_or_default()
}
