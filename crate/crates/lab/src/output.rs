use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use temple_core::report::{EstimateReport, Row, Verdict};

use crate::{ExperimentConfig, LabError};

/// An experiment's report plus extra artifacts `(file name, contents)`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: EstimateReport,
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn new(report: EstimateReport) -> Self {
        Outcome {
            report,
            artifacts: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    experiment: &'a str,
    config_echo: &'a ExperimentConfig,
    verdict: Verdict,
    metrics: &'a std::collections::BTreeMap<String, f64>,
    table: &'a [Row],
    anomalies: &'a [String],
    timestamp: String,
}

/// Pretty-printed `report.json` contents.
pub fn report_json(report: &EstimateReport, config: &ExperimentConfig, timestamp: &str) -> Result<String, LabError> {
    let file = ReportFile {
        experiment: config.experiment.name(),
        config_echo: config,
        verdict: report.verdict,
        metrics: &report.metrics,
        table: &report.table,
        anomalies: &report.anomalies,
        timestamp: timestamp.to_string(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

/// CSV of the report table with the union of the row keys as header.
pub fn table_csv(table: &[Row]) -> Result<Vec<u8>, LabError> {
    let columns: BTreeSet<&str> = table.iter().flat_map(|r| r.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns)?;
    for row in table {
        w.write_record(columns.iter().map(|c| row.get(*c).map(|v| v.to_string()).unwrap_or_default()))?;
    }
    w.into_inner().map_err(|e| LabError::Io(e.into_error()))
}

/// Writes `report.json`, `table.csv` (for a nonempty table) and the
/// artifacts into `out_dir`; returns the written paths.
pub fn emit_report(outcome: &Outcome, config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let path = out_dir.join("report.json");
    std::fs::write(&path, report_json(&outcome.report, config, &timestamp)?)?;
    written.push(path);
    if !outcome.report.table.is_empty() {
        let path = out_dir.join("table.csv");
        std::fs::write(&path, table_csv(&outcome.report.table)?)?;
        written.push(path);
    }
    for (name, bytes) in &outcome.artifacts {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}
