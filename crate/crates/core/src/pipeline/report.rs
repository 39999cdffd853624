use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_stage_log, Stage, COMPRESSION_JSON, EFFICIENCY_JSON, PASSK_JSON, STAGE_LOG_FILE, VERIFY_SUMMARY};
use crate::corpus::StageRecord;
use crate::error::{Error, Result};
use crate::evalkit::{EfficiencyTable, PassAtKReport};
use crate::reference::external_table;
use crate::verify::VerificationSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelRow {
    pub stage: String,
    pub input: usize,
    pub output: usize,
    pub removed: usize,
    pub reduction_percent: f64,
}

/// Per-stage counts of a run, excluding the ingest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Funnel {
    pub rows: Vec<FunnelRow>,
    pub initial: usize,
    pub remaining: usize,
    pub cumulative_reduction_percent: f64,
}

fn percent(input: usize, output: usize) -> f64 {
    if input == 0 {
        0.0
    } else {
        100.0 * (input - output.min(input)) as f64 / input as f64
    }
}

impl Funnel {
    pub fn from_log(log: &[StageRecord]) -> Self {
        let rows: Vec<FunnelRow> = log
            .iter()
            .filter(|r| r.stage != "ingest")
            .map(|r| FunnelRow {
                stage: r.stage.clone(),
                input: r.input,
                output: r.output,
                removed: r.input.saturating_sub(r.output),
                reduction_percent: percent(r.input, r.output),
            })
            .collect();
        let initial = log.first().map_or(0, |r| r.input);
        let remaining = log.last().map_or(0, |r| r.output);
        Funnel {
            rows,
            initial,
            remaining,
            cumulative_reduction_percent: percent(initial, remaining),
        }
    }

    /// Every stage keeps at most its input and feeds the next one.
    pub fn is_monotone(&self) -> bool {
        self.rows.iter().all(|r| r.output <= r.input) && self.rows.windows(2).all(|w| w[1].input == w[0].output)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>8} {:>8} {:>10}\n", "stage", "in", "out", "reduction");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<10} {:>8} {:>8} {:>9.2}%\n",
                r.stage, r.input, r.output, r.reduction_percent
            ));
        }
        out.push_str(&format!(
            "{:<10} {:>8} {:>8} {:>9.2}%\n",
            "overall", self.initial, self.remaining, self.cumulative_reduction_percent
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub text: String,
    /// Pipeline stages with no recorded output.
    pub missing: Vec<Stage>,
    pub found_any: bool,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Deserialize)]
struct CompressionEntry {
    corpus: String,
    report: crate::quality::CompressionReport,
}

/// Summarizes whatever artifacts `dir` holds.
pub fn report(dir: &Path) -> Result<ReportOutcome> {
    let mut text = String::new();
    let mut missing = Vec::new();
    let mut found_any = false;

    let log_path = dir.join(STAGE_LOG_FILE);
    if log_path.is_file() {
        found_any = true;
        let log = read_stage_log(&log_path)?;
        let funnel = Funnel::from_log(&log);
        text.push_str("Filtering funnel\n");
        text.push_str(&funnel.to_table());
        missing = Stage::ALL
            .into_iter()
            .filter(|s| !log.iter().any(|r| r.stage == s.name()))
            .collect();
        if !missing.is_empty() {
            let names: Vec<&str> = missing.iter().map(|s| s.name()).collect();
            text.push_str(&format!(
                "note: partial run; no artifacts for stages: {}\n",
                names.join(", ")
            ));
        }
    } else {
        let present: Vec<Stage> = Stage::ALL
            .into_iter()
            .filter(|s| dir.join(s.file_name()).is_file())
            .collect();
        if !present.is_empty() {
            found_any = true;
            text.push_str(&format!("note: {STAGE_LOG_FILE} is missing; stage corpora found:\n"));
            for s in &present {
                let body =
                    fs::read_to_string(dir.join(s.file_name())).map_err(|e| Error::io(dir.join(s.file_name()), e))?;
                let n = body.lines().filter(|l| !l.trim().is_empty()).count();
                text.push_str(&format!("  {:<10} {n} samples\n", s.name()));
            }
            missing = Stage::ALL.into_iter().filter(|s| !present.contains(s)).collect();
        }
    }

    if let Some(summary) = read_json::<VerificationSummary>(&dir.join(VERIFY_SUMMARY))? {
        found_any = true;
        text.push_str(&format!(
            "\nVerification: {} of {} passed, rejection rate {:.2}%\n",
            summary.passed,
            summary.total,
            summary.rejection_rate * 100.0
        ));
        for (status, n) in &summary.counts {
            text.push_str(&format!("  {:<13} {n}\n", status.as_str()));
        }
    }

    if let Some(entries) = read_json::<Vec<CompressionEntry>>(&dir.join(COMPRESSION_JSON))? {
        found_any = true;
        text.push_str("\nCompression ratios (gzip)\n");
        for e in &entries {
            text.push_str(&format!(
                "  {:<15} CR {:.3}  CR-POS {:.3}\n",
                e.corpus, e.report.cr, e.report.cr_pos
            ));
        }
        if let Some(e) = entries.first() {
            text.push_str(&format!("  note: {}\n", e.report.cr_pos_interpretation));
        }
    }

    let mut eval = false;
    if let Some(passk) = read_json::<PassAtKReport>(&dir.join(PASSK_JSON))? {
        found_any = true;
        eval = true;
        text.push_str(&format!("\npass@k over {} problems\n", passk.per_problem.len()));
        text.push_str(&passk.to_table());
    }
    if let Some(table) = read_json::<EfficiencyTable>(&dir.join(EFFICIENCY_JSON))? {
        found_any = true;
        eval = true;
        text.push_str("\nToken efficiency\n");
        text.push_str(&table.to_string());
    }
    if eval {
        text.push('\n');
        text.push_str(&external_table());
    }

    if !found_any {
        text = format!("no artifacts found in {}\n", dir.display());
    }
    Ok(ReportOutcome {
        text,
        missing,
        found_any,
    })
}
