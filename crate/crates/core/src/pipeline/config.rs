use std::path::{Path, PathBuf};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dedup::{Combine, SimilarityConfig, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::quality::{Field, DEFAULT_JUDGE_CONCURRENCY};
use crate::verify::{DEFAULT_FAIL_PATTERN, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum JudgeMode {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Iverilog,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    #[default]
    Heuristic,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Fill missing `domain` labels with the keyword classifier.
    pub assign_domains: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub threshold: f64,
    pub combine: Combine,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            threshold: DEFAULT_THRESHOLD,
            combine: Combine::Or,
        }
    }
}

impl DedupConfig {
    pub fn similarity(&self) -> SimilarityConfig {
        SimilarityConfig {
            threshold: self.threshold,
            combine: self.combine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub rules: Option<PathBuf>,
    pub judge: JudgeMode,
    pub concurrency: usize,
    pub judge_timeout_secs: u64,
    pub compression_fields: Vec<Field>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            rules: None,
            judge: JudgeMode::Stub,
            concurrency: DEFAULT_JUDGE_CONCURRENCY,
            judge_timeout_secs: 30,
            compression_fields: vec![Field::Solution],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub backend: BackendKind,
    pub workers: usize,
    pub timeout_secs: u64,
    pub fail_pattern: String,
    pub mock_script: Option<PathBuf>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            backend: BackendKind::Iverilog,
            workers: 4,
            timeout_secs: DEFAULT_TIMEOUT.as_secs(),
            fail_pattern: DEFAULT_FAIL_PATTERN.into(),
            mock_script: None,
        }
    }
}

impl VerifySection {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub n: u64,
    pub k: Vec<u64>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub generator: GeneratorKind,
    pub generator_timeout_secs: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n: 10,
            k: vec![1, 5, 10],
            temperature: 0.2,
            top_p: 0.95,
            max_new_tokens: 4096,
            generator: GeneratorKind::Stub,
            generator_timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSection {
    pub classifier: ClassifierKind,
    /// Replaces the shipped heuristic config file.
    pub difficulty_config: Option<PathBuf>,
    /// Overrides for the heuristic's two thresholds.
    pub easy_below: Option<f64>,
    pub medium_below: Option<f64>,
    pub templates_dir: Option<PathBuf>,
    pub classifier_timeout_secs: Option<u64>,
}

/// Single-file configuration for every stage. Every key is optional;
/// command-line flags override values read from the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub ingest: IngestConfig,
    pub dedup: DedupConfig,
    pub quality: QualityConfig,
    pub verify: VerifySection,
    pub eval: EvalSection,
    pub adaptive: AdaptiveSection,
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(format!("{e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks for every numeric field.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dedup;
        if !(d.threshold > 0.0 && d.threshold <= 1.0) {
            return Err(bad(format!("dedup.threshold = {} is outside (0, 1]", d.threshold)));
        }
        if self.quality.concurrency == 0 {
            return Err(bad("quality.concurrency must be at least 1".into()));
        }
        if self.quality.judge_timeout_secs == 0 {
            return Err(bad("quality.judge_timeout_secs must be at least 1".into()));
        }
        if self.quality.compression_fields.is_empty() {
            return Err(bad("quality.compression_fields is empty".into()));
        }
        let v = &self.verify;
        if v.workers == 0 {
            return Err(bad("verify.workers must be at least 1".into()));
        }
        if v.timeout_secs == 0 {
            return Err(bad("verify.timeout_secs must be at least 1".into()));
        }
        Regex::new(&v.fail_pattern).map_err(|e| bad(format!("verify.fail_pattern: {e}")))?;
        let e = &self.eval;
        if e.k.is_empty() || e.k.contains(&0) {
            return Err(bad("eval.k must list values of at least 1".into()));
        }
        let max_k = *e.k.iter().max().expect("non-empty");
        if e.n < max_k {
            return Err(bad(format!("eval.n = {} is smaller than the largest k ({max_k})", e.n)));
        }
        if !(e.temperature >= 0.0 && e.temperature.is_finite()) {
            return Err(bad(format!(
                "eval.temperature = {} must be non-negative",
                e.temperature
            )));
        }
        if !(e.top_p > 0.0 && e.top_p <= 1.0) {
            return Err(bad(format!("eval.top_p = {} is outside (0, 1]", e.top_p)));
        }
        if e.max_new_tokens == 0 || e.generator_timeout_secs == 0 {
            return Err(bad(
                "eval.max_new_tokens and eval.generator_timeout_secs must be at least 1".into(),
            ));
        }
        if let (Some(s1), Some(s2)) = (self.adaptive.easy_below, self.adaptive.medium_below) {
            if s1 > s2 {
                return Err(bad(format!(
                    "adaptive.easy_below ({s1}) exceeds adaptive.medium_below ({s2})"
                )));
            }
        }
        Ok(())
    }
}
