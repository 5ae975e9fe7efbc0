//! Report ledger and output files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Config;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `lhs >= (1 - tolerance) * rhs`.
    pub fn at_least(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self { name: name.into(), lhs, rhs, tolerance, pass: lhs >= (1.0 - tolerance) * rhs }
    }

    /// `lhs <= (1 + tolerance) * rhs`.
    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self { name: name.into(), lhs, rhs, tolerance, pass: lhs <= (1.0 + tolerance) * rhs }
    }

    /// `|lhs - rhs| <= tolerance * |rhs|`.
    pub fn close(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self { name: name.into(), lhs, rhs, tolerance, pass: (lhs - rhs).abs() <= tolerance * rhs.abs() }
    }

    /// `lhs <= rhs + tolerance`.
    pub fn below(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self { name: name.into(), lhs, rhs, tolerance, pass: lhs <= rhs + tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub git_hash: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub resolution: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub inputs: Config,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub results: Value,
    pub provenance: Provenance,
}

pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Everything an experiment produces besides the report itself.
#[derive(Default)]
pub struct Artifacts {
    pub checks: Vec<Check>,
    pub results: Value,
    pub tables: Vec<Table>,
    pub plots: Vec<(String, String)>,
}

impl Artifacts {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }
}

/// Writes `report.json`, `timing.json`, `tables/*.csv` and `plots/*.svg` under `dir`.
pub fn write_outputs(dir: &Path, report: &Report, artifacts: &Artifacts, wall_seconds: f64) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("tables"))?;
    fs::create_dir_all(dir.join("plots"))?;
    let mut written = Vec::new();
    let mut json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    json.push('\n');
    let path = dir.join("report.json");
    fs::write(&path, json)?;
    written.push(path);
    let timing = serde_json::json!({ "experiment": report.experiment, "wall_seconds": wall_seconds });
    fs::write(dir.join("timing.json"), format!("{timing:#}\n"))?;
    for t in &artifacts.tables {
        let path = dir.join("tables").join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    for (name, svg) in &artifacts.plots {
        let path = dir.join("plots").join(format!("{name}.svg"));
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_directions() {
        assert!(Check::at_least("a", 0.96, 1.0, 0.05).pass);
        assert!(!Check::at_least("a", 0.94, 1.0, 0.05).pass);
        assert!(Check::at_most("b", 1.04, 1.0, 0.05).pass);
        assert!(!Check::at_most("b", 1.06, 1.0, 0.05).pass);
        assert!(Check::close("c", 15.8, 16.0, 0.02).pass);
        assert!(!Check::close("c", 15.6, 16.0, 0.02).pass);
        assert!(Check::below("d", 1e-13, 0.0, 1e-12).pass);
        assert!(!Check::below("d", 1e-11, 0.0, 1e-12).pass);
    }

    #[test]
    fn nan_never_passes() {
        assert!(!Check::at_least("a", f64::NAN, 1.0, 0.0).pass);
        assert!(!Check::close("c", f64::NAN, 1.0, 0.5).pass);
        assert!(!Check::below("d", f64::NAN, 0.0, 1.0).pass);
    }

    #[test]
    fn writes_tables_and_plots() {
        let dir = tempfile::tempdir().unwrap();
        let cfg: Config = serde_json::from_str(r#"{"experiment": "coarea-check"}"#).unwrap();
        let mut artifacts = Artifacts::default();
        let mut t = Table::new("t", &["x", "y"]);
        t.push(vec!["1".into(), "2".into()]);
        artifacts.tables.push(t);
        artifacts.plots.push(("p".into(), "<svg/>".into()));
        let report = Report {
            experiment: "coarea-check".into(),
            inputs: cfg,
            checks: vec![],
            pass: true,
            results: Value::Null,
            provenance: Provenance { git_hash: "abc", version: "0", seed: None, resolution: 8 },
        };
        let written = write_outputs(dir.path(), &report, &artifacts, 1.5).unwrap();
        assert_eq!(written.len(), 3);
        assert_eq!(std::fs::read_to_string(dir.path().join("tables/t.csv")).unwrap(), "x,y\n1,2\n");
        let timing: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("timing.json")).unwrap()).unwrap();
        assert_eq!(timing["wall_seconds"], 1.5);
        assert!(!std::fs::read_to_string(dir.path().join("report.json")).unwrap().contains("wall"));
    }
}
