//! Rendering of experiment reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Tsv,
    Json,
}

pub const TSV_HEADER: &str = "model\trun\tselection_accuracy\ttest_accuracy";

/// One row per run plus a `mean` row, accuracies to 4 decimals (TSV), or the
/// full report (JSON).
pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => {
            let mut out = String::new();
            writeln!(out, "{TSV_HEADER}").unwrap();
            for r in &report.runs {
                writeln!(
                    out,
                    "{}\t{}\t{:.4}\t{:.4}",
                    report.model, r.run_index, r.best_validation_accuracy, r.test_accuracy
                )
                .unwrap();
            }
            writeln!(
                out,
                "{}\tmean\t{:.4}\t{:.4}",
                report.model, report.mean_validation_accuracy, report.mean_test_accuracy
            )
            .unwrap();
            out
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
    }
}

pub fn parse_report_json(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("report json: {e}")))
}
