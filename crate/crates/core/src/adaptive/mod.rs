//! Difficulty-routed generation: classify a problem, pick a prompt mode and
//! completion budget, and generate within that budget.

mod classify;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

pub use classify::{
    DifficultyClassifier, FixedClassifier, HeuristicClassifier, HttpClassifier, Thresholds, Weights,
    CLASSIFIER_URL_ENV, DEFAULT_DIFFICULTY_TOML,
};

use crate::corpus::{Corpus, Sample};
use crate::error::{Error, Result};
use crate::evalkit::{efficiency_report, verify_candidate, EfficiencyTable, TokenUsage};
use crate::generation::{truncate_to_tokens, whitespace_tokens, GenerationClient, GenerationRequest, SamplingParams};
use crate::parallel::bounded_map;
use crate::verify::{SimulatorBackend, VerificationStatus, VerifyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(Error::argument(format!("unknown difficulty {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Direct,
    StandardReasoning,
    ExtendedReasoning,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Direct => "direct",
            PromptMode::StandardReasoning => "standard_reasoning",
            PromptMode::ExtendedReasoning => "extended_reasoning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningPlan {
    pub difficulty: Difficulty,
    pub prompt_mode: PromptMode,
    pub max_new_tokens: u32,
}

impl fmt::Display for ReasoningPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.difficulty,
            self.prompt_mode.as_str(),
            self.max_new_tokens
        )
    }
}

pub fn plan_for(difficulty: Difficulty) -> ReasoningPlan {
    let (prompt_mode, max_new_tokens) = match difficulty {
        Difficulty::Easy => (PromptMode::Direct, 512),
        Difficulty::Medium => (PromptMode::StandardReasoning, 1280),
        Difficulty::Hard => (PromptMode::ExtendedReasoning, 4096),
    };
    ReasoningPlan {
        difficulty,
        prompt_mode,
        max_new_tokens,
    }
}

const DIRECT_TXT: &str = include_str!("../../assets/templates/direct.txt");
const STANDARD_TXT: &str = include_str!("../../assets/templates/standard_reasoning.txt");
const EXTENDED_TXT: &str = include_str!("../../assets/templates/extended_reasoning.txt");

/// Prompt text per mode; `{problem}` is replaced by the problem statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub direct: String,
    pub standard: String,
    pub extended: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            direct: DIRECT_TXT.into(),
            standard: STANDARD_TXT.into(),
            extended: EXTENDED_TXT.into(),
        }
    }
}

impl PromptTemplates {
    /// Reads `direct.txt`, `standard_reasoning.txt` and
    /// `extended_reasoning.txt` from `dir`; files that are absent keep the
    /// shipped wording.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "template directory {} does not exist",
                dir.display()
            )));
        }
        let mut t = PromptTemplates::default();
        for (mode, slot) in [
            (PromptMode::Direct, &mut t.direct),
            (PromptMode::StandardReasoning, &mut t.standard),
            (PromptMode::ExtendedReasoning, &mut t.extended),
        ] {
            let path = dir.join(format!("{}.txt", mode.as_str()));
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                if !text.contains("{problem}") {
                    return Err(Error::Config(format!(
                        "{} lacks a {{problem}} placeholder",
                        path.display()
                    )));
                }
                *slot = text;
            }
        }
        Ok(t)
    }

    pub fn get(&self, mode: PromptMode) -> &str {
        match mode {
            PromptMode::Direct => &self.direct,
            PromptMode::StandardReasoning => &self.standard,
            PromptMode::ExtendedReasoning => &self.extended,
        }
    }

    pub fn render(&self, mode: PromptMode, problem: &str) -> String {
        self.get(mode).replace("{problem}", problem)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispatch {
    pub text: String,
    pub plan: ReasoningPlan,
    /// Completion tokens, never above `plan.max_new_tokens`.
    pub tokens_used: u32,
    pub proxy_tokens: bool,
    /// The client overran the budget and its output was cut.
    pub truncated: bool,
    pub prompt: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DispatchOptions {
    pub sampling: SamplingParams,
    pub candidate_index: u32,
}

/// Generates under a fixed plan. Output past the budget is cut to
/// `max_new_tokens` whitespace tokens and the count clamped.
pub fn dispatch_with_plan(
    problem: &Sample,
    plan: ReasoningPlan,
    client: &dyn GenerationClient,
    templates: &PromptTemplates,
    opts: &DispatchOptions,
) -> Result<Dispatch> {
    let statement = problem.prompt_text();
    if statement.trim().is_empty() {
        return Err(Error::argument(format!("problem {} has no text", problem.id)));
    }
    let prompt = templates.render(plan.prompt_mode, &statement);
    let req = GenerationRequest {
        problem_id: &problem.id,
        prompt: &prompt,
        max_new_tokens: plan.max_new_tokens,
        sampling: opts.sampling,
        candidate_index: opts.candidate_index,
    };
    let g = client.generate(&req).map_err(|e| Error::Generation {
        plan,
        message: e.to_string(),
    })?;

    let (text, tokens_used, truncated) = if g.tokens_used > plan.max_new_tokens {
        warn!(
            "{}: client used {} tokens against a budget of {}; output truncated",
            problem.id, g.tokens_used, plan.max_new_tokens
        );
        let cut = truncate_to_tokens(&g.text, plan.max_new_tokens).to_string();
        let used = if g.proxy_count {
            whitespace_tokens(&cut)
        } else {
            plan.max_new_tokens
        };
        (cut, used, true)
    } else {
        (g.text, g.tokens_used, false)
    };
    Ok(Dispatch {
        text,
        plan,
        tokens_used,
        proxy_tokens: g.proxy_count,
        truncated,
        prompt,
    })
}

/// Classifies `problem`, then generates under the matching plan.
pub fn dispatch(
    problem: &Sample,
    classifier: &dyn DifficultyClassifier,
    client: &dyn GenerationClient,
    templates: &PromptTemplates,
    opts: &DispatchOptions,
) -> Result<Dispatch> {
    let statement = problem.prompt_text();
    if statement.trim().is_empty() {
        return Err(Error::argument(format!("problem {} has no text", problem.id)));
    }
    let difficulty = classifier.classify(&statement)?;
    dispatch_with_plan(problem, plan_for(difficulty), client, templates, opts)
}

/// Either a fixed difficulty or classifier-driven routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteMode {
    Adaptive,
    Easy,
    Medium,
    Hard,
}

impl RouteMode {
    pub const ALL: [RouteMode; 4] = [RouteMode::Easy, RouteMode::Medium, RouteMode::Hard, RouteMode::Adaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            RouteMode::Adaptive => "adaptive",
            RouteMode::Easy => "easy",
            RouteMode::Medium => "medium",
            RouteMode::Hard => "hard",
        }
    }

    pub fn forced(self) -> Option<Difficulty> {
        match self {
            RouteMode::Adaptive => None,
            RouteMode::Easy => Some(Difficulty::Easy),
            RouteMode::Medium => Some(Difficulty::Medium),
            RouteMode::Hard => Some(Difficulty::Hard),
        }
    }
}

impl FromStr for RouteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adaptive" => Ok(RouteMode::Adaptive),
            other => Ok(RouteMode::from(other.parse::<Difficulty>()?)),
        }
    }
}

impl From<Difficulty> for RouteMode {
    fn from(d: Difficulty) -> Self {
        match d {
            Difficulty::Easy => RouteMode::Easy,
            Difficulty::Medium => RouteMode::Medium,
            Difficulty::Hard => RouteMode::Hard,
        }
    }
}

/// Dispatch under `mode`: forced modes skip the classifier.
pub fn route(
    problem: &Sample,
    mode: RouteMode,
    classifier: &dyn DifficultyClassifier,
    client: &dyn GenerationClient,
    templates: &PromptTemplates,
    opts: &DispatchOptions,
) -> Result<Dispatch> {
    match mode.forced() {
        Some(d) => dispatch_with_plan(problem, plan_for(d), client, templates, opts),
        None => dispatch(problem, classifier, client, templates, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRecord {
    pub problem_id: String,
    pub mode: RouteMode,
    pub plan: Option<ReasoningPlan>,
    pub tokens_used: Option<u32>,
    pub status: Option<VerificationStatus>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: RouteMode,
    pub problems: usize,
    pub passed: usize,
    pub errors: usize,
    pub pass_at_1: f64,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub modes: Vec<ModeResult>,
    pub table: EfficiencyTable,
    pub records: Vec<RouteRecord>,
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub workers: usize,
    pub verify: VerifyConfig,
    pub dispatch: DispatchOptions,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            workers: 4,
            verify: VerifyConfig::default(),
            dispatch: DispatchOptions::default(),
        }
    }
}

/// Runs every problem under forced easy, medium and hard plans and under
/// adaptive routing, verifies each output, and tabulates pass@1 and mean
/// tokens with deltas against adaptive. Per-problem failures are counted
/// in `errors` and score as incorrect.
pub fn compare_modes(
    problems: &Corpus,
    classifier: &dyn DifficultyClassifier,
    client: &dyn GenerationClient,
    backend: &dyn SimulatorBackend,
    templates: &PromptTemplates,
    cfg: &CompareConfig,
) -> Result<ModeComparison> {
    if cfg.workers == 0 {
        return Err(Error::argument("workers must be at least 1"));
    }
    let mut modes = Vec::new();
    let mut records = Vec::new();
    for mode in RouteMode::ALL {
        let recs: Vec<(RouteRecord, bool)> = bounded_map(problems.samples(), cfg.workers, |p| {
            let mut r = RouteRecord {
                problem_id: p.id.clone(),
                mode,
                plan: None,
                tokens_used: None,
                status: None,
                error: None,
            };
            let mut proxy = false;
            match route(p, mode, classifier, client, templates, &cfg.dispatch) {
                Ok(d) => {
                    r.plan = Some(d.plan);
                    r.tokens_used = Some(d.tokens_used);
                    proxy = d.proxy_tokens;
                    match verify_candidate(p, 0, &d.text, backend, &cfg.verify) {
                        Ok(st) => r.status = Some(st),
                        Err(e) => r.error = Some(e.to_string()),
                    }
                }
                Err(e) => {
                    warn!("{} [{}]: {e}", p.id, mode.as_str());
                    if let Error::Generation { plan, .. } = &e {
                        r.plan = Some(*plan);
                    }
                    r.error = Some(e.to_string());
                }
            }
            (r, proxy)
        });

        let mut usage = TokenUsage::default();
        let mut passed = 0;
        let mut errors = 0;
        for (r, proxy) in &recs {
            if let Some(t) = r.tokens_used {
                usage.record(t.into(), *proxy);
            }
            if r.status == Some(VerificationStatus::Pass) {
                passed += 1;
            }
            if r.error.is_some() {
                errors += 1;
            }
        }
        let n = recs.len();
        modes.push(ModeResult {
            mode,
            problems: n,
            passed,
            errors,
            pass_at_1: if n == 0 { 0.0 } else { passed as f64 / n as f64 },
            usage,
        });
        records.extend(recs.into_iter().map(|(r, _)| r));
    }

    let table = if problems.is_empty() {
        EfficiencyTable {
            baseline: RouteMode::Adaptive.as_str().into(),
            proxy_tokens: false,
            rows: Vec::new(),
        }
    } else {
        let rows: Vec<(String, TokenUsage, Option<f64>)> = modes
            .iter()
            .map(|m| (m.mode.as_str().to_string(), m.usage.clone(), Some(m.pass_at_1)))
            .collect();
        efficiency_report(&rows, RouteMode::Adaptive.as_str())?
    };
    Ok(ModeComparison { modes, table, records })
}
