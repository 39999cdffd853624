//! End-to-end curation: ingest, compile check, dedup, quality, verify.
//!
//! Each stage writes its corpus into the output directory before the next
//! one starts, together with the running stage log and funnel, so a run
//! can resume from any stage with [`run_pipeline`]'s `from` argument.

mod config;
mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use log::info;
use serde::Serialize;
use thiserror::Error as ThisError;

pub use config::{
    AdaptiveSection, BackendKind, ClassifierKind, DedupConfig, EvalSection, GeneratorKind, IngestConfig, JudgeMode,
    PathsConfig, PipelineConfig, QualityConfig, VerifySection,
};
pub use report::{report, Funnel, FunnelRow, ReportOutcome};

use crate::adaptive::{DifficultyClassifier, HeuristicClassifier, HttpClassifier, PromptTemplates};
use crate::corpus::{load_corpus, save_corpus, Corpus, StageRecord};
use crate::dedup::{deduplicate_with_groups, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::generation::{GenerationClient, HttpGenerator, ReferenceGenerator};
use crate::quality::{compression_ratio, quality_filter, HttpJudge, JudgeClient, RuleSet, StubJudge};
use crate::taxonomy::{assign_domains, DomainClassifier};
use crate::verify::{compile_check, verify_corpus, IcarusBackend, MockBackend, SimulatorBackend, VerifyConfig};

pub const STAGE_LOG_FILE: &str = "stage_log.json";
pub const FUNNEL_JSON: &str = "funnel.json";
pub const FUNNEL_TXT: &str = "funnel.txt";
pub const COMPILE_RESULTS: &str = "compile_results.jsonl";
pub const DEDUP_GROUPS: &str = "dedup_groups.json";
pub const QUALITY_REJECTIONS: &str = "quality_rejections.json";
pub const COMPRESSION_JSON: &str = "compression.json";
pub const VERIFY_RESULTS: &str = "verify_results.jsonl";
pub const VERIFY_SUMMARY: &str = "verify_summary.json";
pub const PASSK_JSON: &str = "passk.json";
pub const EFFICIENCY_JSON: &str = "efficiency.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Compile,
    Dedup,
    Quality,
    Verify,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Compile,
        Stage::Dedup,
        Stage::Quality,
        Stage::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Compile => "compile",
            Stage::Dedup => "dedup",
            Stage::Quality => "quality",
            Stage::Verify => "verify",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Corpus file written by this stage.
    pub fn file_name(self) -> String {
        format!("{:02}_{}.jsonl", self.index(), self.name())
    }

    fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[],
            Stage::Compile => &[COMPILE_RESULTS],
            Stage::Dedup => &[DEDUP_GROUPS],
            Stage::Quality => &[QUALITY_REJECTIONS, COMPRESSION_JSON],
            Stage::Verify => &[VERIFY_RESULTS, VERIFY_SUMMARY],
        }
    }

    fn previous(self) -> Option<Stage> {
        self.index().checked_sub(1).map(|i| Stage::ALL[i])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, ThisError)]
pub enum PipelineError {
    #[error("{0}")]
    Config(Error),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Error,
    },
}

impl PipelineError {
    /// 2 for configuration problems, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

/// Collaborators used by the stages.
pub struct PipelineDeps<'a> {
    pub backend: &'a dyn SimulatorBackend,
    pub judge: &'a dyn JudgeClient,
    pub embedder: &'a dyn EmbeddingProvider,
    pub rules: &'a RuleSet,
    pub domains: &'a dyn DomainClassifier,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub corpus: Corpus,
    pub funnel: Funnel,
    pub output_dir: PathBuf,
    pub stages_run: Vec<Stage>,
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::integrity(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).map_err(|e| Error::integrity(e.to_string()))?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_stage_log(path: &Path) -> Result<Vec<StageRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_progress(dir: &Path, corpus: &Corpus) -> Result<()> {
    write_json(&dir.join(STAGE_LOG_FILE), corpus.stage_log())?;
    let funnel = Funnel::from_log(corpus.stage_log());
    write_json(&dir.join(FUNNEL_JSON), &funnel)?;
    fs::write(dir.join(FUNNEL_TXT), funnel.to_table()).map_err(|e| Error::io(dir.join(FUNNEL_TXT), e))
}

/// Corpus and stage log as they stood after `stage`.
pub fn load_stage(dir: &Path, stage: Stage) -> Result<Corpus> {
    let path = dir.join(stage.file_name());
    let samples = load_corpus(&path)?.into_samples();
    let log: Vec<StageRecord> = read_stage_log(&dir.join(STAGE_LOG_FILE))?
        .into_iter()
        .filter(|r| Stage::from_str(&r.stage).map(|s| s <= stage).unwrap_or(false))
        .collect();
    match log.last() {
        Some(last) if last.stage == stage.name() && last.output == samples.len() => {}
        _ => {
            return Err(Error::integrity(format!(
                "{} does not match the {} entry of {STAGE_LOG_FILE}",
                path.display(),
                stage.name()
            )))
        }
    }
    Corpus::with_log(samples, log)
}

#[derive(Serialize)]
struct CompressionEntry {
    corpus: String,
    report: crate::quality::CompressionReport,
}

#[derive(Serialize)]
struct QualityRecord<'a> {
    rejected: &'a [crate::quality::Rejection],
    undetermined: &'a [String],
}

fn run_stage(
    stage: Stage,
    input: Option<Corpus>,
    cfg: &PipelineConfig,
    deps: &PipelineDeps,
    dir: &Path,
) -> Result<Corpus> {
    let verify_cfg = VerifyConfig::default()
        .with_timeout(cfg.verify.timeout())
        .with_fail_pattern(&cfg.verify.fail_pattern)?;
    let out = match stage {
        Stage::Ingest => {
            let path = cfg
                .paths
                .input
                .as_ref()
                .ok_or_else(|| Error::Config("paths.input is not set".into()))?;
            let c = load_corpus(path)?;
            if cfg.ingest.assign_domains {
                assign_domains(&c, deps.domains)?
            } else {
                c
            }
        }
        Stage::Compile => {
            let input = input.expect("stage input");
            let r = compile_check(&input, deps.backend, cfg.verify.workers, &verify_cfg)?;
            write_jsonl(&dir.join(COMPILE_RESULTS), &r.results)?;
            r.corpus
        }
        Stage::Dedup => {
            let input = input.expect("stage input");
            let (c, groups) = deduplicate_with_groups(&input, deps.embedder, cfg.dedup.similarity())?;
            write_json(&dir.join(DEDUP_GROUPS), &groups)?;
            c
        }
        Stage::Quality => {
            let input = input.expect("stage input");
            let q = quality_filter(&input, deps.judge, deps.rules, cfg.quality.concurrency)?;
            write_json(
                &dir.join(QUALITY_REJECTIONS),
                &QualityRecord {
                    rejected: &q.rejected,
                    undetermined: &q.undetermined,
                },
            )?;
            let mut entries = Vec::new();
            for (name, c) in [("before_quality", &input), ("after_quality", &q.corpus)] {
                if !c.is_empty() {
                    entries.push(CompressionEntry {
                        corpus: name.into(),
                        report: compression_ratio(c, &cfg.quality.compression_fields)?,
                    });
                }
            }
            write_json(&dir.join(COMPRESSION_JSON), &entries)?;
            q.corpus
        }
        Stage::Verify => {
            let input = input.expect("stage input");
            let v = verify_corpus(&input, deps.backend, cfg.verify.workers, &verify_cfg)?;
            write_jsonl(&dir.join(VERIFY_RESULTS), &v.results)?;
            write_json(&dir.join(VERIFY_SUMMARY), &v.summary)?;
            v.corpus
        }
    };
    save_corpus(&out, dir.join(stage.file_name()))?;
    write_progress(dir, &out)?;
    Ok(out)
}

/// Runs the stages from `from` through verify. Starting past ingest reads
/// the previous stage's corpus and the stage log from the output directory.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    deps: &PipelineDeps,
    from: Stage,
) -> std::result::Result<PipelineRun, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let dir = cfg
        .paths
        .output_dir
        .clone()
        .ok_or_else(|| PipelineError::Config(Error::Config("paths.output_dir is not set".into())))?;
    if from == Stage::Ingest {
        match &cfg.paths.input {
            None => return Err(PipelineError::Config(Error::Config("paths.input is not set".into()))),
            Some(p) if !p.is_file() => {
                return Err(PipelineError::Config(Error::Config(format!(
                    "input corpus {} not found",
                    p.display()
                ))))
            }
            _ => {}
        }
    }
    fs::create_dir_all(&dir).map_err(|e| PipelineError::Stage {
        stage: from,
        source: Error::io(&dir, e),
    })?;

    let mut corpus = match from.previous() {
        None => None,
        Some(prev) => Some(load_stage(&dir, prev).map_err(|source| PipelineError::Stage { stage: from, source })?),
    };
    // stale outputs from an earlier run must not mix with this one
    for st in Stage::ALL.into_iter().filter(|s| *s >= from) {
        for name in std::iter::once(st.file_name()).chain(st.artifacts().iter().map(|a| a.to_string())) {
            let _ = fs::remove_file(dir.join(name));
        }
    }

    let mut stages_run = Vec::new();
    for stage in Stage::ALL.into_iter().filter(|s| *s >= from) {
        info!("stage {stage}: starting");
        let out = run_stage(stage, corpus.take(), cfg, deps, &dir)
            .map_err(|source| PipelineError::Stage { stage, source })?;
        let rec = out.stage_log().last().expect("stage recorded");
        info!("stage {stage}: {} -> {}", rec.input, rec.output);
        stages_run.push(stage);
        corpus = Some(out);
    }
    let corpus = corpus.expect("at least one stage ran");
    Ok(PipelineRun {
        funnel: Funnel::from_log(corpus.stage_log()),
        corpus,
        output_dir: dir,
        stages_run,
    })
}

/// Simulator selected by the verify section.
pub fn build_backend(v: &VerifySection) -> Result<Box<dyn SimulatorBackend>> {
    Ok(match v.backend {
        BackendKind::Iverilog => Box::new(IcarusBackend::from_env()),
        BackendKind::Mock => match &v.mock_script {
            Some(p) => Box::new(MockBackend::load_script(p)?),
            None => Box::new(MockBackend::new()),
        },
    })
}

pub fn build_judge(q: &QualityConfig) -> Result<Box<dyn JudgeClient>> {
    Ok(match q.judge {
        JudgeMode::Stub => Box::new(StubJudge),
        JudgeMode::Http => Box::new(HttpJudge::from_env(Duration::from_secs(q.judge_timeout_secs))?),
    })
}

pub fn build_rules(q: &QualityConfig) -> Result<RuleSet> {
    match &q.rules {
        Some(p) => RuleSet::load(p),
        None => Ok(RuleSet::default()),
    }
}

pub fn build_classifier(a: &AdaptiveSection) -> Result<Box<dyn DifficultyClassifier>> {
    Ok(match a.classifier {
        ClassifierKind::Http => Box::new(HttpClassifier::from_env(Duration::from_secs(
            a.classifier_timeout_secs.unwrap_or(30),
        ))?),
        ClassifierKind::Heuristic => {
            let mut h = match &a.difficulty_config {
                Some(p) => HeuristicClassifier::load(p)?,
                None => HeuristicClassifier::default(),
            };
            let s1 = a.easy_below.unwrap_or(h.thresholds.easy_below);
            let s2 = a.medium_below.unwrap_or(h.thresholds.medium_below);
            h.set_thresholds(s1, s2)?;
            Box::new(h)
        }
    })
}

pub fn build_templates(a: &AdaptiveSection) -> Result<PromptTemplates> {
    match &a.templates_dir {
        Some(d) => PromptTemplates::load_dir(d),
        None => Ok(PromptTemplates::default()),
    }
}

/// The stub answers each problem with its own reference solution.
pub fn build_generator(e: &EvalSection, problems: &Corpus) -> Result<Box<dyn GenerationClient>> {
    Ok(match e.generator {
        GeneratorKind::Stub => Box::new(ReferenceGenerator::from_corpus(problems)),
        GeneratorKind::Http => Box::new(HttpGenerator::from_env(Duration::from_secs(e.generator_timeout_secs))?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;
    use crate::dedup::NgramHashEmbedder;
    use crate::taxonomy::KeywordDomainClassifier;
    use crate::verify::MockOutcome;

    const INC: &str = "module inc_reg(input clk, input [7:0] d, output reg [7:0] q);\n  always @(posedge clk) q <= d + 8'd1;\nendmodule\n";
    const MUX: &str = "module mux4(input [1:0] sel, input [3:0] x, output y);\n  assign y = x[sel];\nendmodule\n";
    const PARITY: &str =
        "module parity_gen #(parameter W = 16) (input [W-1:0] data, output odd);\n  assign odd = ^data;\nendmodule\n";

    fn write_input(dir: &Path) -> PathBuf {
        let tb = "module tb; endmodule";
        let samples = vec![
            Sample::new("a", "register with increment", INC).with_testbench(tb),
            Sample::new("b", "register with increment", INC).with_testbench(tb),
            Sample::new("c", "four way multiplexer", MUX).with_testbench(tb),
            Sample::new("d", "broken", "module broken(input a;").with_testbench(tb),
            Sample::new("e", "parity generator", PARITY).with_testbench(tb),
        ];
        let c = Corpus::new(samples).unwrap();
        let p = dir.join("in.jsonl");
        save_corpus(&c, &p).unwrap();
        p
    }

    fn config(dir: &Path) -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.paths.input = Some(write_input(dir));
        c.paths.output_dir = Some(dir.join("out"));
        c.verify.backend = BackendKind::Mock;
        c
    }

    fn run(
        cfg: &PipelineConfig,
        backend: &MockBackend,
        from: Stage,
    ) -> std::result::Result<PipelineRun, PipelineError> {
        let rules = RuleSet::default();
        let deps = PipelineDeps {
            backend,
            judge: &StubJudge,
            embedder: &NgramHashEmbedder::default(),
            rules: &rules,
            domains: &KeywordDomainClassifier::default(),
        };
        run_pipeline(cfg, &deps, from)
    }

    #[test]
    fn full_run_writes_every_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path());
        let backend = MockBackend::scripted([("e".to_string(), MockOutcome::SimFail)]);
        let r = run(&cfg, &backend, Stage::Ingest).unwrap();
        assert_eq!(r.corpus.ids().collect::<Vec<_>>(), ["a", "c"]);
        let stages: Vec<_> = r
            .corpus
            .stage_log()
            .iter()
            .map(|s| (s.stage.as_str(), s.input, s.output))
            .collect();
        assert_eq!(
            stages,
            [
                ("ingest", 5, 5),
                ("compile", 5, 4),
                ("dedup", 4, 3),
                ("quality", 3, 3),
                ("verify", 3, 2)
            ]
        );
        let out = tmp.path().join("out");
        for st in Stage::ALL {
            assert!(out.join(st.file_name()).is_file());
            for a in st.artifacts() {
                assert!(out.join(a).is_file(), "{a}");
            }
        }
        assert!(out.join(FUNNEL_TXT).is_file());
        assert!(load_corpus(out.join(Stage::Verify.file_name()))
            .unwrap()
            .samples()
            .iter()
            .all(|s| s.verified));
    }

    #[test]
    fn resume_from_stage_matches_full_run() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path());
        let backend = MockBackend::new();
        let full = run(&cfg, &backend, Stage::Ingest).unwrap();
        let log_before = fs::read(tmp.path().join("out").join(STAGE_LOG_FILE)).unwrap();
        let resumed = run(&cfg, &backend, Stage::Quality).unwrap();
        assert_eq!(resumed.stages_run, [Stage::Quality, Stage::Verify]);
        assert_eq!(resumed.corpus, full.corpus);
        assert_eq!(
            fs::read(tmp.path().join("out").join(STAGE_LOG_FILE)).unwrap(),
            log_before
        );
    }

    #[test]
    fn invalid_config_fails_before_any_stage() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = config(tmp.path());
        cfg.dedup.threshold = 1.5;
        let err = run(&cfg, &MockBackend::new(), Stage::Ingest).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!tmp.path().join("out").exists());
        cfg.dedup.threshold = 0.8;
        cfg.paths.input = Some(tmp.path().join("missing.jsonl"));
        assert_eq!(
            run(&cfg, &MockBackend::new(), Stage::Ingest).unwrap_err().exit_code(),
            2
        );
    }

    #[test]
    fn stage_failure_names_stage() {
        // resuming at dedup without an upstream compile corpus
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path());
        let err = run(&cfg, &MockBackend::new(), Stage::Dedup).unwrap_err();
        assert!(matches!(
            &err,
            PipelineError::Stage {
                stage: Stage::Dedup,
                ..
            }
        ));
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("stage dedup"));
    }

    #[test]
    fn partial_artifacts_survive_a_failing_stage() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path());
        let backend = MockBackend::new();
        run(&cfg, &backend, Stage::Ingest).unwrap();
        // break the dedup output so a resumed quality stage fails
        let out = tmp.path().join("out");
        fs::write(out.join(Stage::Dedup.file_name()), "{not json\n").unwrap();
        let err = run(&cfg, &backend, Stage::Quality).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Stage {
                stage: Stage::Quality,
                ..
            }
        ));
        assert!(out.join(Stage::Compile.file_name()).is_file());
        assert!(out.join(STAGE_LOG_FILE).is_file());
    }

    #[test]
    fn stage_names_parse() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert_eq!(Stage::Verify.file_name(), "04_verify.jsonl");
        assert!("lint".parse::<Stage>().is_err());
    }
}
