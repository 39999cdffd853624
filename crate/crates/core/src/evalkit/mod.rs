//! Benchmark evaluation: pass@k over generated candidates and token
//! accounting per generation mode.

mod efficiency;
mod passk;

use log::warn;
use serde::{Deserialize, Serialize};

pub use efficiency::{efficiency_report, format_percent, EfficiencyRow, EfficiencyTable, TokenUsage};
pub use passk::{pass_at_k, PassAtKReport, ProblemCount};

use crate::corpus::{Corpus, Sample};
use crate::error::{Error, Result};
use crate::generation::{extract_verilog, GenerationClient, GenerationRequest, SamplingParams};
use crate::parallel::bounded_map;
use crate::verify::{verify_sample, SimulatorBackend, VerificationStatus, VerifyConfig};

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub n: u64,
    pub ks: Vec<u64>,
    pub sampling: SamplingParams,
    pub max_new_tokens: u32,
    /// Generations and verifications in flight at once.
    pub workers: usize,
    pub verify: VerifyConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n: 10,
            ks: vec![1, 5, 10],
            sampling: SamplingParams::default(),
            max_new_tokens: 4096,
            workers: 4,
            verify: VerifyConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::argument("k list is empty"));
        }
        if self.ks.contains(&0) {
            return Err(Error::argument("k values must be at least 1"));
        }
        let max_k = *self.ks.iter().max().expect("non-empty");
        if self.n < max_k {
            return Err(Error::argument(format!(
                "n = {} is smaller than max k = {max_k}",
                self.n
            )));
        }
        if self.workers == 0 {
            return Err(Error::argument("workers must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub problem_id: String,
    pub candidate: u64,
    pub status: Option<VerificationStatus>,
    pub tokens: Option<u64>,
    /// `tokens` is the whitespace proxy.
    pub proxy_tokens: bool,
    pub error: Option<String>,
}

impl CandidateRecord {
    pub fn passed(&self) -> bool {
        self.status == Some(VerificationStatus::Pass)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub report: PassAtKReport,
    pub usage: TokenUsage,
    pub candidates: Vec<CandidateRecord>,
}

/// Extracts code from `text` and verifies it against `problem`'s testbench.
pub fn verify_candidate(
    problem: &Sample,
    candidate: u64,
    text: &str,
    backend: &dyn SimulatorBackend,
    cfg: &VerifyConfig,
) -> Result<VerificationStatus> {
    let code = extract_verilog(text);
    let s = Sample::new(format!("{}#{candidate}", problem.id), problem.problem.clone(), code)
        .with_testbench(problem.testbench.clone());
    Ok(verify_sample(&s, backend, cfg)?.status)
}

/// Draws `cfg.n` candidates per problem, verifies each against the
/// problem's testbench and averages pass@k over problems. A candidate whose
/// generation or verification errors counts as incorrect.
pub fn evaluate_benchmark(
    problems: &Corpus,
    generator: &dyn GenerationClient,
    backend: &dyn SimulatorBackend,
    cfg: &EvalConfig,
) -> Result<BenchmarkOutcome> {
    cfg.validate()?;
    if let Some(p) = problems.samples().iter().find(|p| p.testbench.trim().is_empty()) {
        return Err(Error::argument(format!("problem {} has no testbench", p.id)));
    }

    let jobs: Vec<(&Sample, u64)> = problems
        .samples()
        .iter()
        .flat_map(|p| (0..cfg.n).map(move |i| (p, i)))
        .collect();
    let candidates: Vec<CandidateRecord> = bounded_map(&jobs, cfg.workers, |&(p, i)| {
        let prompt = p.prompt_text();
        let req = GenerationRequest {
            problem_id: &p.id,
            prompt: &prompt,
            max_new_tokens: cfg.max_new_tokens,
            sampling: cfg.sampling,
            candidate_index: i as u32,
        };
        let mut rec = CandidateRecord {
            problem_id: p.id.clone(),
            candidate: i,
            status: None,
            tokens: None,
            proxy_tokens: false,
            error: None,
        };
        match generator.generate(&req) {
            Ok(g) => {
                rec.tokens = Some(g.tokens_used.into());
                rec.proxy_tokens = g.proxy_count;
                match verify_candidate(p, i, &g.text, backend, &cfg.verify) {
                    Ok(st) => rec.status = Some(st),
                    Err(e) => rec.error = Some(e.to_string()),
                }
            }
            Err(e) => {
                warn!("{} candidate {i}: generation failed: {e}", p.id);
                rec.error = Some(e.to_string());
            }
        }
        rec
    });

    let mut usage = TokenUsage::default();
    let mut counts = Vec::with_capacity(problems.len());
    for (p, chunk) in problems.samples().iter().zip(candidates.chunks(cfg.n as usize)) {
        counts.push(ProblemCount {
            problem_id: p.id.clone(),
            n: cfg.n,
            c: chunk.iter().filter(|r| r.passed()).count() as u64,
        });
    }
    for r in &candidates {
        if let Some(t) = r.tokens {
            usage.record(t, r.proxy_tokens);
        }
    }
    Ok(BenchmarkOutcome {
        report: PassAtKReport::from_counts(counts, &cfg.ks)?,
        usage,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{FnGenerator, Generation, ReferenceGenerator};
    use crate::verify::MockBackend;

    const ADDER: &str = "module add(input a, input b, output y); assign y = a ^ b; endmodule";

    fn problems(n: usize) -> Corpus {
        Corpus::new(
            (0..n)
                .map(|i| Sample::new(format!("p{i}"), "add two bits", ADDER).with_testbench("module tb; endmodule"))
                .collect(),
        )
        .unwrap()
    }

    fn cfg(n: u64, ks: &[u64]) -> EvalConfig {
        EvalConfig {
            n,
            ks: ks.to_vec(),
            ..EvalConfig::default()
        }
    }

    #[test]
    fn perfect_generator() {
        let ps = problems(3);
        let g = ReferenceGenerator::from_corpus(&ps);
        let out = evaluate_benchmark(&ps, &g, &MockBackend::new(), &cfg(10, &[1, 5])).unwrap();
        assert_eq!(out.report.pass_at[&1], 1.0);
        assert_eq!(out.usage.counts.len(), 30);
        assert!(out.usage.proxy);
    }

    #[test]
    fn null_generator() {
        let ps = problems(2);
        let g = FnGenerator(|_: &GenerationRequest| {
            Ok(Generation {
                text: "this is not verilog".into(),
                tokens_used: 4,
                proxy_count: false,
            })
        });
        let out = evaluate_benchmark(&ps, &g, &MockBackend::new(), &cfg(10, &[1, 5, 10])).unwrap();
        assert!(out.report.pass_at.values().all(|&v| v == 0.0));
        assert!(!out.usage.proxy);
    }

    #[test]
    fn half_correct_generator() {
        let ps = problems(4);
        let g = FnGenerator(|r: &GenerationRequest| {
            let text = if r.candidate_index.is_multiple_of(2) {
                ADDER
            } else {
                "module broken("
            };
            Ok(Generation {
                text: text.into(),
                tokens_used: 7,
                proxy_count: false,
            })
        });
        let out = evaluate_benchmark(&ps, &g, &MockBackend::new(), &cfg(10, &[1, 5])).unwrap();
        assert_eq!(out.report.pass_at[&1], 0.5);
        assert!((out.report.pass_at[&5] - (1.0 - 1.0 / 252.0)).abs() < 1e-12);
        for p in &out.report.per_problem {
            assert_eq!((p.n, p.c), (10, 5));
        }
    }

    #[test]
    fn generation_errors_count_as_incorrect() {
        let ps = problems(1);
        let g = FnGenerator(|r: &GenerationRequest| {
            if r.candidate_index < 3 {
                Err(Error::Transport("down".into()))
            } else {
                Ok(Generation {
                    text: ADDER.into(),
                    tokens_used: 1,
                    proxy_count: false,
                })
            }
        });
        let out = evaluate_benchmark(&ps, &g, &MockBackend::new(), &cfg(10, &[1])).unwrap();
        assert_eq!(out.report.per_problem[0].c, 7);
        assert_eq!(out.usage.counts.len(), 7);
        assert_eq!(out.candidates.iter().filter(|c| c.error.is_some()).count(), 3);
    }

    #[test]
    fn preconditions() {
        let g = ReferenceGenerator::from_corpus(&problems(1));
        assert!(evaluate_benchmark(&problems(1), &g, &MockBackend::new(), &cfg(4, &[5])).is_err());
        let no_tb = Corpus::new(vec![Sample::new("p0", "x", ADDER)]).unwrap();
        assert!(evaluate_benchmark(&no_tb, &g, &MockBackend::new(), &cfg(4, &[1])).is_err());
    }
}
