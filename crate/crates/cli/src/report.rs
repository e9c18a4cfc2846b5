use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Passes iff `|computed − expected| ≤ tolerance`; NaN never passes.
    pub fn value(check: impl Into<String>, computed: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            computed,
            expected,
            tolerance,
            pass: (computed - expected).abs() <= tolerance,
        }
    }

    /// A violation count; passes iff it is zero.
    pub fn audit(check: impl Into<String>, violations: usize) -> Self {
        Self {
            check: check.into(),
            computed: violations as f64,
            expected: 0.0,
            tolerance: 0.0,
            pass: violations == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub r: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "P_over_rn")]
    pub p_over_rn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: String,
    pub setup: String,
    pub checks: Vec<CheckRecord>,
    pub violations: usize,
    pub curve: Vec<CurveRow>,
    pub diagnostics: Vec<String>,
    pub wall_time_seconds: f64,
}

impl ScenarioReport {
    pub fn new(scenario: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.to_string(),
            setup: String::new(),
            checks: Vec::new(),
            violations: 0,
            curve: Vec::new(),
            diagnostics: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn audit(&mut self, check: impl Into<String>, violations: usize) {
        self.violations += violations;
        self.push(CheckRecord::audit(check, violations));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.diagnostics.push(line.into());
    }

    /// Records a numeric failure as a failing check so the report still
    /// explains what went wrong.
    pub fn record_failure(&mut self, err: &CliError) {
        let stage = match err {
            CliError::Numeric { stage, .. } => stage.clone(),
            _ => "run".to_string(),
        };
        self.checks.push(CheckRecord {
            check: format!("{stage}:numeric_failure"),
            computed: f64::NAN,
            expected: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
        });
        self.note(err.to_string());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Shortest round-trip decimal, switching to exponent form for very large or
/// small magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn checks_csv(report: &ScenarioReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "check",
        "computed",
        "expected",
        "tolerance",
        "pass",
    ])
    .map_err(csv_error)?;
    for c in &report.checks {
        w.write_record([
            report.scenario.clone(),
            c.check.clone(),
            fmt_num(c.computed),
            fmt_num(c.expected),
            fmt_num(c.tolerance),
            c.pass.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

pub fn curve_csv(rows: &[CurveRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "P", "P_over_rn"]).map_err(csv_error)?;
    for row in rows {
        w.write_record([fmt_num(row.r), fmt_num(row.p), fmt_num(row.p_over_rn)])
            .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Non-finite numbers become strings so the JSON stays valid.
fn json_number(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or_else(|| serde_json::Value::String(x.to_string()))
}

pub fn report_json(report: &ScenarioReport) -> Result<Vec<u8>, CliError> {
    let checks: Vec<serde_json::Value> = report
        .checks
        .iter()
        .map(|c| {
            serde_json::json!({
                "check": c.check,
                "computed": json_number(c.computed),
                "expected": json_number(c.expected),
                "tolerance": json_number(c.tolerance),
                "pass": c.pass,
            })
        })
        .collect();
    let curve: Vec<serde_json::Value> = report
        .curve
        .iter()
        .map(|row| {
            serde_json::json!({
                "r": json_number(row.r),
                "P": json_number(row.p),
                "P_over_rn": json_number(row.p_over_rn),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "schema_version": report.schema_version,
        "scenario": report.scenario,
        "setup": report.setup,
        "pass": report.passed(),
        "violations": report.violations,
        "checks": checks,
        "curve": curve,
        "diagnostics": report.diagnostics,
        "wall_time_seconds": report.wall_time_seconds,
    });
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.into()))?;
    out.push(b'\n');
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Writes the report (and the density curve, if any) into `dir`; returns the
/// paths written.
pub fn emit(report: &ScenarioReport, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let main = match format {
        Format::Csv => {
            let path = dir.join(format!("{}.csv", report.scenario));
            write_file(&path, &checks_csv(report)?)?;
            path
        }
        Format::Json => {
            let path = dir.join(format!("{}.json", report.scenario));
            write_file(&path, &report_json(report)?)?;
            path
        }
    };
    written.push(main);
    if !report.curve.is_empty() {
        let path = dir.join(format!("{}_curve.csv", report.scenario));
        write_file(&path, &curve_csv(&report.curve)?)?;
        written.push(path);
    }
    Ok(written)
}
