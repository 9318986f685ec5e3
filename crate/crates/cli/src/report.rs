//! Report and table output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// One tolerance check: `value <= tolerance` passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// A CSV table written beside the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: Vec<&'static str>) -> Self {
        Self {
            file: file.to_string(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// What a task produces before it is written out.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Tolerances the task applied outside of [`Check`]s.
    pub tolerances: BTreeMap<String, f64>,
    /// Failures that are not a tolerance comparison.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| format!("{} = {:e} exceeds tolerance {:e}", c.name, c.value, c.tolerance))
            .chain(self.failures.iter().cloned())
            .collect()
    }
}

/// The `report.json` document. It holds no timing, so identical inputs and
/// seed give identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub task: &'static str,
    pub seed: u64,
    pub inputs_digest: String,
    pub results: Value,
    pub max_violations: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, f64>,
    pub passed: bool,
    pub failures: Vec<String>,
    pub tables: Vec<String>,
}

impl Report {
    pub fn new(task: &'static str, seed: u64, inputs_digest: String, outcome: &Outcome) -> Self {
        let mut max_violations = BTreeMap::new();
        let mut tolerance = outcome.tolerances.clone();
        for c in &outcome.checks {
            let v = max_violations.entry(c.name.clone()).or_insert(c.value);
            *v = v.max(c.value);
            tolerance.insert(c.name.clone(), c.tolerance);
        }
        let failures = outcome.failed();
        Self {
            task,
            seed,
            inputs_digest,
            results: outcome.results.clone(),
            max_violations,
            tolerance,
            passed: failures.is_empty(),
            failures,
            tables: outcome.tables.iter().map(|t| t.file.clone()).collect(),
        }
    }
}

pub fn write(dir: &Path, report: &Report, tables: &[Table]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    for t in tables {
        let mut w = csv::Writer::from_path(dir.join(&t.file))?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}
