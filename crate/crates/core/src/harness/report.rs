//! Report export. JSON carries the whole report; CSV carries the per-task
//! table with the columns in [`TASK_COLUMNS`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::sim::SimulationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format '{other}'")),
        }
    }
}

pub const TASK_COLUMNS: [&str; 8] =
    ["task", "assigned", "successes", "failures", "reliability", "expected_std", "realized_std", "error_score"];

pub fn export_report<W: Write>(report: &SimulationReport, format: ReportFormat, mut out: W) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(TASK_COLUMNS)?;
            for t in &report.tasks {
                w.write_record([
                    t.task.0.to_string(),
                    t.assigned.to_string(),
                    t.successes.to_string(),
                    t.failures.to_string(),
                    t.reliability.to_string(),
                    t.expected_std.to_string(),
                    t.realized_std.to_string(),
                    t.error_score.map(|e| e.to_string()).unwrap_or_default(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
