//! Versioned JSON reports, timing sidecars and CSV traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// One numerical claim with its tolerance. `margin` is positive when the claim holds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    /// `at_most`, `at_least` or `flag` (value 1 for true, tolerance 1).
    pub relation: &'static str,
    pub tolerance: f64,
    pub margin: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let margin = tolerance - value;
        Verdict {
            name: name.into(),
            value,
            relation: "at_most",
            tolerance,
            margin,
            pass: value <= tolerance,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Verdict {
            name: name.into(),
            value,
            relation: "at_least",
            tolerance: threshold,
            margin: value - threshold,
            pass: value >= threshold,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let value = if ok { 1.0 } else { 0.0 };
        Verdict {
            name: name.into(),
            value,
            relation: "flag",
            tolerance: 1.0,
            margin: value - 1.0,
            pass: ok,
        }
    }
}

/// What an experiment hands back: module results, verdicts and plot tables.
pub struct Outcome {
    pub results: Value,
    pub verdicts: Vec<Verdict>,
    pub tables: Vec<Table>,
}

#[derive(Serialize)]
pub struct RunReport<'a> {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub kind: &'static str,
    pub config: &'a ExperimentConfig,
    pub passed: bool,
    pub verdicts: &'a [Verdict],
    pub results: &'a Value,
    /// CSV files written next to the report.
    pub tables: Vec<String>,
}

/// Plot data: the header names each column with its unit in brackets.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            // shortest round-trip formatting keeps the files byte-stable
            w.write_record(r.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Wall-clock stages, kept out of the report so reports stay byte-identical across runs.
pub struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Stopwatch {
    pub fn start() -> Self {
        let now = Instant::now();
        Stopwatch {
            start: now,
            last: now,
            stages: Vec::new(),
        }
    }

    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push((stage.into(), (now - self.last).as_secs_f64()));
        self.last = now;
    }

    fn to_json(&self) -> Value {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        serde_json::json!({
            "unix_time": stamp,
            "total_seconds": self.start.elapsed().as_secs_f64(),
            "stages": self.stages.iter().map(|(k, v)| serde_json::json!({"stage": k, "seconds": v})).collect::<Vec<_>>(),
        })
    }
}

/// Writes `<stem>.json`, `<stem>.timings.json` and `<stem>.<table>.csv` into `dir`.
pub fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    outcome: &Outcome,
    clock: &Stopwatch,
) -> Result<(PathBuf, bool)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = config.stem();
    let mut tables = Vec::new();
    for t in &outcome.tables {
        let file = format!("{stem}.{}.csv", t.name);
        t.write(&dir.join(&file))?;
        tables.push(file);
    }
    let passed = outcome.verdicts.iter().all(|v| v.pass);
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        kind: config.kind().name(),
        config,
        passed,
        verdicts: &outcome.verdicts,
        results: &outcome.results,
        tables,
    };
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(
        dir.join(format!("{stem}.timings.json")),
        serde_json::to_string_pretty(&clock.to_json())? + "\n",
    )?;
    Ok((path, passed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_are_positive_exactly_when_claims_hold() {
        let a = Verdict::at_most("x", 0.5, 1.0);
        assert!(a.pass && a.margin == 0.5);
        let b = Verdict::at_least("y", 0.5, 1.0);
        assert!(!b.pass && b.margin == -0.5);
        let c = Verdict::flag("z", false);
        assert!(!c.pass && c.margin < 0.0);
    }
}
