//! Functional verification: compile each solution with its testbench, run
//! the simulation, and keep only samples that pass.
//!
//! A sample passes when the simulator exits with status 0 and no output
//! line matches the failure pattern. Build directories are deleted after a
//! pass and kept after any failure.

mod icarus;
mod mock;
mod process;

use std::any::Any;
use std::collections::BTreeMap;
use std::time::Duration;

use log::{debug, warn};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use icarus::{find_executable, IcarusBackend, IVERILOG_ENV, VVP_ENV};
pub use mock::{MockBackend, MockFallback, MockOutcome};
pub use process::{run_with_timeout, ProcessOutput};

use crate::corpus::{record_stage, Corpus, Sample};
use crate::error::{Error, Result};
use crate::parallel::bounded_map;

pub const SOLUTION_FILE: &str = "solution.v";
pub const TESTBENCH_FILE: &str = "testbench.v";
pub const DEFAULT_FAIL_PATTERN: &str = "(?i)fail|error|mismatch";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_DETAIL_LIMIT: usize = 4096;

#[derive(Debug, Clone, Error)]
pub enum BackendError {
    #[error("simulator tool missing: {0}")]
    ToolMissing(String),
    #[error("backend I/O: {0}")]
    Io(String),
}

#[derive(Debug, Clone)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct CompileUnit {
    pub sample_id: String,
    pub sources: Vec<SourceFile>,
}

/// A successfully compiled unit. `payload` is backend-private.
pub struct CompiledUnit {
    pub sample_id: String,
    pub elapsed: Duration,
    pub workdir: Option<tempfile::TempDir>,
    pub payload: Box<dyn Any + Send>,
}

pub enum CompileOutcome {
    Compiled(CompiledUnit),
    Failed {
        log: String,
        elapsed: Duration,
        workdir: Option<tempfile::TempDir>,
    },
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub exit_code: Option<i32>,
    pub output: String,
    pub wall: Duration,
    pub timed_out: bool,
}

/// A Verilog compiler + simulator pair. Implementations must be safe to
/// call concurrently for distinct samples, and `simulate` must return
/// within `timeout` plus a short grace period.
pub trait SimulatorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn compile(&self, unit: &CompileUnit) -> std::result::Result<CompileOutcome, BackendError>;
    fn simulate(&self, compiled: &CompiledUnit, timeout: Duration) -> std::result::Result<SimOutcome, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    Pass,
    CompileFail,
    SimFail,
    Timeout,
    ToolMissing,
}

impl VerificationStatus {
    pub const ALL: [VerificationStatus; 5] = [
        VerificationStatus::Pass,
        VerificationStatus::CompileFail,
        VerificationStatus::SimFail,
        VerificationStatus::Timeout,
        VerificationStatus::ToolMissing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerificationStatus::Pass => "pass",
            VerificationStatus::CompileFail => "compile_fail",
            VerificationStatus::SimFail => "sim_fail",
            VerificationStatus::Timeout => "timeout",
            VerificationStatus::ToolMissing => "tool_missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub sample_id: String,
    pub status: VerificationStatus,
    pub detail: String,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub total: usize,
    pub passed: usize,
    pub counts: BTreeMap<VerificationStatus, usize>,
    pub rejection_rate: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl VerificationSummary {
    pub fn from_results(results: &[VerificationResult]) -> Self {
        let mut counts: BTreeMap<VerificationStatus, usize> = VerificationStatus::ALL.iter().map(|s| (*s, 0)).collect();
        for r in results {
            *counts.entry(r.status).or_default() += 1;
        }
        let total = results.len();
        let passed = counts[&VerificationStatus::Pass];
        let mut warnings = Vec::new();
        if total > 0 && counts[&VerificationStatus::ToolMissing] == total {
            warnings.push("simulator tools are missing for every sample; nothing was verified".to_string());
        }
        VerificationSummary {
            total,
            passed,
            counts,
            rejection_rate: if total == 0 {
                0.0
            } else {
                1.0 - passed as f64 / total as f64
            },
            warnings,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub timeout: Duration,
    pub fail_pattern: Regex,
    pub detail_limit: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            timeout: DEFAULT_TIMEOUT,
            fail_pattern: Regex::new(DEFAULT_FAIL_PATTERN).expect("default pattern compiles"),
            detail_limit: DEFAULT_DETAIL_LIMIT,
        }
    }
}

impl VerifyConfig {
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_fail_pattern(mut self, pattern: &str) -> Result<Self> {
        self.fail_pattern =
            Regex::new(pattern).map_err(|e| Error::argument(format!("fail pattern {pattern:?}: {e}")))?;
        Ok(self)
    }
}

fn truncate(mut s: String, limit: usize) -> String {
    if s.len() > limit {
        let mut cut = limit;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
        s.push_str("\n[truncated]");
    }
    s
}

fn millis(d: Duration) -> u64 {
    d.as_millis().min(u128::from(u64::MAX)) as u64
}

fn retain_dir(dir: Option<tempfile::TempDir>, id: &str) {
    if let Some(d) = dir {
        let path = d.keep();
        debug!("kept build directory for {id}: {}", path.display());
    }
}

fn result(
    sample: &Sample,
    status: VerificationStatus,
    detail: String,
    wall: Duration,
    cfg: &VerifyConfig,
) -> VerificationResult {
    VerificationResult {
        sample_id: sample.id.clone(),
        status,
        detail: truncate(detail, cfg.detail_limit),
        wall_ms: millis(wall),
    }
}

fn compile_and_run(
    sample: &Sample,
    sources: Vec<SourceFile>,
    backend: &dyn SimulatorBackend,
    cfg: &VerifyConfig,
    simulate: bool,
) -> VerificationResult {
    let unit = CompileUnit {
        sample_id: sample.id.clone(),
        sources,
    };
    let compiled = match backend.compile(&unit) {
        Ok(CompileOutcome::Compiled(c)) => c,
        Ok(CompileOutcome::Failed { log, elapsed, workdir }) => {
            retain_dir(workdir, &sample.id);
            return result(sample, VerificationStatus::CompileFail, log, elapsed, cfg);
        }
        Err(BackendError::ToolMissing(m)) => {
            return result(sample, VerificationStatus::ToolMissing, m, Duration::ZERO, cfg);
        }
        Err(e @ BackendError::Io(_)) => {
            warn!("{}: {e}", sample.id);
            return result(
                sample,
                VerificationStatus::CompileFail,
                e.to_string(),
                Duration::ZERO,
                cfg,
            );
        }
    };
    if !simulate {
        return result(sample, VerificationStatus::Pass, String::new(), compiled.elapsed, cfg);
    }

    let sim = match backend.simulate(&compiled, cfg.timeout) {
        Ok(s) => s,
        Err(BackendError::ToolMissing(m)) => {
            return result(sample, VerificationStatus::ToolMissing, m, compiled.elapsed, cfg);
        }
        Err(e @ BackendError::Io(_)) => {
            warn!("{}: {e}", sample.id);
            retain_dir(compiled.workdir, &sample.id);
            return result(
                sample,
                VerificationStatus::SimFail,
                e.to_string(),
                compiled.elapsed,
                cfg,
            );
        }
    };
    let wall = compiled.elapsed + sim.wall;

    let (status, detail) = if sim.timed_out {
        (
            VerificationStatus::Timeout,
            format!("simulation exceeded {:?}\n{}", cfg.timeout, sim.output),
        )
    } else {
        let flagged: Vec<&str> = sim.output.lines().filter(|l| cfg.fail_pattern.is_match(l)).collect();
        if sim.exit_code == Some(0) && flagged.is_empty() {
            (VerificationStatus::Pass, sim.output.clone())
        } else {
            let mut d = format!("exit status: {:?}\n", sim.exit_code);
            for l in &flagged {
                d.push_str(l);
                d.push('\n');
            }
            d.push_str("---\n");
            d.push_str(&sim.output);
            (VerificationStatus::SimFail, d)
        }
    };
    if status == VerificationStatus::Pass {
        drop(compiled.workdir);
    } else {
        retain_dir(compiled.workdir, &sample.id);
    }
    result(sample, status, detail, wall, cfg)
}

/// Compiles `solution` with `testbench` and simulates the result.
pub fn verify_sample(
    sample: &Sample,
    backend: &dyn SimulatorBackend,
    cfg: &VerifyConfig,
) -> Result<VerificationResult> {
    if sample.solution.trim().is_empty() {
        return Err(Error::argument(format!("sample {} has no solution", sample.id)));
    }
    if sample.testbench.trim().is_empty() {
        return Err(Error::argument(format!("sample {} has no testbench", sample.id)));
    }
    let sources = vec![
        SourceFile {
            name: SOLUTION_FILE.into(),
            text: sample.solution.clone(),
        },
        SourceFile {
            name: TESTBENCH_FILE.into(),
            text: sample.testbench.clone(),
        },
    ];
    Ok(compile_and_run(sample, sources, backend, cfg, true))
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub corpus: Corpus,
    pub summary: VerificationSummary,
    pub results: Vec<VerificationResult>,
}

/// Verifies every sample on up to `workers` threads. Passing samples are
/// kept in input order and marked verified. Samples lacking a solution or
/// testbench are reported as `sim_fail` rather than aborting the run.
pub fn verify_corpus(
    corpus: &Corpus,
    backend: &dyn SimulatorBackend,
    workers: usize,
    cfg: &VerifyConfig,
) -> Result<VerifyOutcome> {
    if workers == 0 {
        return Err(Error::argument("workers must be at least 1"));
    }
    let results: Vec<VerificationResult> = bounded_map(corpus.samples(), workers, |s| {
        verify_sample(s, backend, cfg).unwrap_or_else(|e| VerificationResult {
            sample_id: s.id.clone(),
            status: VerificationStatus::SimFail,
            detail: e.to_string(),
            wall_ms: 0,
        })
    });
    let summary = VerificationSummary::from_results(&results);
    for w in &summary.warnings {
        warn!("{w}");
    }

    let passed: Vec<Sample> = corpus
        .samples()
        .iter()
        .zip(&results)
        .filter(|(_, r)| r.status == VerificationStatus::Pass)
        .map(|(s, _)| Sample {
            verified: true,
            ..s.clone()
        })
        .collect();
    let out = Corpus::new(passed)?;
    Ok(VerifyOutcome {
        corpus: record_stage(corpus, "verify", out)?,
        summary,
        results,
    })
}

#[derive(Debug, Clone)]
pub struct CompileCheckOutcome {
    pub corpus: Corpus,
    pub results: Vec<VerificationResult>,
}

/// Keeps samples whose solution compiles on its own.
pub fn compile_check(
    corpus: &Corpus,
    backend: &dyn SimulatorBackend,
    workers: usize,
    cfg: &VerifyConfig,
) -> Result<CompileCheckOutcome> {
    if workers == 0 {
        return Err(Error::argument("workers must be at least 1"));
    }
    let results: Vec<VerificationResult> = bounded_map(corpus.samples(), workers, |s| {
        if s.solution.trim().is_empty() {
            return result(
                s,
                VerificationStatus::CompileFail,
                "empty solution".into(),
                Duration::ZERO,
                cfg,
            );
        }
        let sources = vec![SourceFile {
            name: SOLUTION_FILE.into(),
            text: s.solution.clone(),
        }];
        compile_and_run(s, sources, backend, cfg, false)
    });
    let summary = VerificationSummary::from_results(&results);
    for w in &summary.warnings {
        warn!("{w}");
    }
    let mut pass = results.iter().map(|r| r.status == VerificationStatus::Pass);
    let out = corpus.retain_by(|_| pass.next().unwrap_or(false));
    Ok(CompileCheckOutcome {
        corpus: record_stage(corpus, "compile", out)?,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StageRecord;

    fn sample(id: &str) -> Sample {
        Sample::new(id, "p", "module m(input a, output y); assign y = a; endmodule")
            .with_testbench("module tb; endmodule")
    }

    fn corpus(samples: Vec<Sample>) -> Corpus {
        let n = samples.len();
        Corpus::with_log(samples, vec![StageRecord::new("ingest", n, n)]).unwrap()
    }

    #[test]
    fn mock_table_drives_classification() {
        let table = [
            ("p", MockOutcome::Pass, VerificationStatus::Pass),
            ("c", MockOutcome::CompileFail, VerificationStatus::CompileFail),
            ("s", MockOutcome::SimFail, VerificationStatus::SimFail),
            ("t", MockOutcome::Timeout, VerificationStatus::Timeout),
            ("m", MockOutcome::ToolMissing, VerificationStatus::ToolMissing),
        ];
        let backend = MockBackend::scripted(table.iter().map(|(id, o, _)| (id.to_string(), *o)));
        let cfg = VerifyConfig::default();
        for (id, _, want) in table {
            let r = verify_sample(&sample(id), &backend, &cfg).unwrap();
            assert_eq!(r.status, want, "{id}");
        }
        let r = verify_sample(&sample("s"), &backend, &cfg).unwrap();
        assert!(r.detail.contains("MISMATCH"));
    }

    #[test]
    fn missing_testbench_is_argument_error() {
        let s = Sample::new("x", "p", "module m; endmodule");
        assert!(matches!(
            verify_sample(&s, &MockBackend::new(), &VerifyConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn summary_counts() {
        let mut backend = MockBackend::new();
        let mut samples = Vec::new();
        for i in 0..10 {
            let id = format!("s{i}");
            if i >= 7 {
                backend.set(&id, MockOutcome::SimFail);
            }
            samples.push(sample(&id));
        }
        let out = verify_corpus(&corpus(samples), &backend, 3, &VerifyConfig::default()).unwrap();
        assert_eq!(out.summary.total, 10);
        assert_eq!(out.summary.passed, 7);
        assert_eq!(out.summary.counts[&VerificationStatus::SimFail], 3);
        assert_eq!(out.summary.counts.values().sum::<usize>(), 10);
        assert!((out.summary.rejection_rate - 0.3).abs() < 1e-12);
        assert!(out.corpus.samples().iter().all(|s| s.verified));
        assert_eq!(
            out.corpus.stage_log().last().unwrap(),
            &StageRecord::new("verify", 10, 7)
        );
    }

    #[test]
    fn all_tools_missing_warns_and_empties() {
        let backend = MockBackend::scripted((0..4).map(|i| (format!("s{i}"), MockOutcome::ToolMissing)));
        let c = corpus((0..4).map(|i| sample(&format!("s{i}"))).collect());
        let out = verify_corpus(&c, &backend, 2, &VerifyConfig::default()).unwrap();
        assert!(out.corpus.is_empty());
        assert_eq!(out.summary.warnings.len(), 1);
        assert_eq!(out.summary.counts[&VerificationStatus::ToolMissing], 4);
    }

    #[test]
    fn structural_mock_compile_check() {
        let c = corpus(vec![
            sample("ok"),
            Sample::new("unbalanced", "p", "module m; module n; endmodule"),
            Sample::new("extra_end", "p", "module m; endmodule endmodule"),
            Sample::new("empty", "p", ""),
        ]);
        let out = compile_check(&c, &MockBackend::new(), 2, &VerifyConfig::default()).unwrap();
        assert_eq!(out.corpus.ids().collect::<Vec<_>>(), ["ok"]);
        assert_eq!(
            out.corpus.stage_log().last().unwrap(),
            &StageRecord::new("compile", 4, 1)
        );
        let empty = compile_check(&Corpus::default(), &MockBackend::new(), 1, &VerifyConfig::default()).unwrap();
        assert!(empty.corpus.is_empty());
    }

    #[test]
    fn mock_directives() {
        let backend = MockBackend::new();
        let cfg = VerifyConfig::default();
        let fail = sample("f").with_testbench("module tb; // mock: fail\nendmodule");
        let hang = sample("h").with_testbench("module tb; // mock: timeout\nendmodule");
        assert_eq!(
            verify_sample(&fail, &backend, &cfg).unwrap().status,
            VerificationStatus::SimFail
        );
        let t = verify_sample(&hang, &backend, &cfg).unwrap();
        assert_eq!(t.status, VerificationStatus::Timeout);
        assert_eq!(t.wall_ms, 30_000);
    }

    #[test]
    fn detail_truncated_on_char_boundary() {
        let s = truncate("é".repeat(10), 5);
        assert!(s.starts_with("éé"));
        assert!(s.ends_with("[truncated]"));
    }

    #[test]
    fn fail_pattern_configurable() {
        assert!(VerifyConfig::default().with_fail_pattern("(").is_err());
        let cfg = VerifyConfig::default().with_fail_pattern("^BAD").unwrap();
        assert!(cfg.fail_pattern.is_match("BAD thing"));
        assert!(!cfg.fail_pattern.is_match("error"));
    }
}
