//! CSV tables and JSON summaries, written by a single aggregator in a
//! fixed order so reruns are byte-identical.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// An exact identity failed.
    Violation,
    /// A tolerance criterion was not met.
    NonConverged,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Violation => 1,
            Status::NonConverged => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Violation => "violation",
            Status::NonConverged => "nonconverged",
        }
    }

    /// The more severe of the two.
    pub fn and(self, other: Status) -> Status {
        match (self, other) {
            (Status::Violation, _) | (_, Status::Violation) => Status::Violation,
            (Status::NonConverged, _) | (_, Status::NonConverged) => Status::NonConverged,
            _ => Status::Ok,
        }
    }
}

/// A command's table, summary and verdict.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
    pub status: Status,
}

impl Outcome {
    pub fn new(header: Vec<&'static str>) -> Self {
        Outcome {
            header,
            rows: Vec::new(),
            summary: json!({}),
            status: Status::Ok,
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn flag(&mut self, status: Status) {
        self.status = self.status.and(status);
    }
}

/// Writes `<dir>/<command>.csv` and `<dir>/<command>.json`; returns the
/// JSON document.
pub fn write(dir: &Path, command: &str, config: &RunConfig, outcome: &Outcome) -> Result<(Value, PathBuf), CliError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{command}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(&outcome.header)?;
    for row in &outcome.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "status": outcome.status.label(),
        "mode": config.mode,
        "group": config.group_spec().to_string(),
        "config": serde_json::to_value(config)?,
        "csv": format!("{command}.csv"),
        "rows": outcome.rows.len(),
        "summary": outcome.summary,
    });
    let json_path = dir.join(format!("{command}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok((doc, json_path))
}
