//! Information-density analysis and the style/quality gate.

mod compress;
mod judge;
mod lexer;
mod lint;

pub use compress::{
    compression_ratio, concatenate, gzip_len, parse_fields, CompressionReport, Field, CR_POS_INTERPRETATION, GZIP_LEVEL,
};
pub use judge::{HttpJudge, JudgeClient, StubJudge, JUDGE_URL_ENV};
pub use lexer::{is_keyword, tokenize, tokenize_to_classes, Token, TokenClass};
pub use lint::{lint_source, style_lint, RuleId, RuleSet, StyleVerdict, Violation, DEFAULT_RULES_TOML};

use log::warn;
use serde::Serialize;

use crate::corpus::{record_stage, Corpus, Sample};
use crate::error::{Error, Result};
use crate::parallel::bounded_map;

pub const DEFAULT_JUDGE_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub id: String,
    /// `"lint"` or `"judge"`.
    pub by: &'static str,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityOutcome {
    pub corpus: Corpus,
    pub rejected: Vec<Rejection>,
    /// Ids kept without a judge verdict because the judge call failed.
    pub undetermined: Vec<String>,
}

enum Decision {
    Keep,
    Undetermined,
    Reject(Rejection),
}

fn decide(sample: &Sample, judge: &dyn JudgeClient, rules: &RuleSet) -> Decision {
    let lint = match style_lint(sample, rules) {
        Ok(v) => v,
        Err(e) => {
            return Decision::Reject(Rejection {
                id: sample.id.clone(),
                by: "lint",
                violations: Vec::new(),
                error: Some(e.to_string()),
            })
        }
    };
    if !lint.passed {
        return Decision::Reject(Rejection {
            id: sample.id.clone(),
            by: "lint",
            violations: lint.violations,
            error: None,
        });
    }
    match judge.assess(sample) {
        Ok(v) if v.passed => Decision::Keep,
        Ok(v) => Decision::Reject(Rejection {
            id: sample.id.clone(),
            by: "judge",
            violations: v.violations,
            error: None,
        }),
        Err(e) => {
            warn!("judge failed for {}: {e}; keeping sample as undetermined", sample.id);
            Decision::Undetermined
        }
    }
}

/// Keeps samples that pass both the lint rules and the judge. Judge
/// transport failures keep the sample and are reported as undetermined.
pub fn quality_filter(
    corpus: &Corpus,
    judge: &dyn JudgeClient,
    rules: &RuleSet,
    concurrency: usize,
) -> Result<QualityOutcome> {
    if concurrency == 0 {
        return Err(Error::argument("judge concurrency must be at least 1"));
    }
    let decisions = bounded_map(corpus.samples(), concurrency, |s| decide(s, judge, rules));

    let mut rejected = Vec::new();
    let mut undetermined = Vec::new();
    let mut keep = Vec::with_capacity(decisions.len());
    for (s, d) in corpus.samples().iter().zip(decisions) {
        match d {
            Decision::Keep => keep.push(true),
            Decision::Undetermined => {
                undetermined.push(s.id.clone());
                keep.push(true);
            }
            Decision::Reject(r) => {
                rejected.push(r);
                keep.push(false);
            }
        }
    }
    if !undetermined.is_empty() {
        warn!("{} sample(s) kept without a judge verdict", undetermined.len());
    }
    let mut flags = keep.into_iter();
    let out = corpus.retain_by(|_| flags.next().unwrap_or(false));
    Ok(QualityOutcome {
        corpus: record_stage(corpus, "quality", out)?,
        rejected,
        undetermined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StageRecord;
    use std::time::Duration;

    fn good(id: &str) -> Sample {
        Sample::new(
            id,
            "pass-through",
            "module buf1(input a, output y);\n  assign y = a;\nendmodule\n",
        )
    }

    fn corpus(samples: Vec<Sample>) -> Corpus {
        let n = samples.len();
        Corpus::with_log(samples, vec![StageRecord::new("ingest", n, n)]).unwrap()
    }

    #[test]
    fn all_passing_is_identity() {
        let c = corpus((0..5).map(|i| good(&format!("g{i}"))).collect());
        let out = quality_filter(&c, &StubJudge, &RuleSet::default(), 4).unwrap();
        assert_eq!(out.corpus.samples(), c.samples());
        assert_eq!(
            out.corpus.stage_log().last().unwrap(),
            &StageRecord::new("quality", 5, 5)
        );
        assert!(out.rejected.is_empty() && out.undetermined.is_empty());
    }

    #[test]
    fn r1_violator_removed() {
        let mut bad = good("bad");
        bad.solution = bad.solution.replace("buf1", "Buf1");
        let c = corpus(vec![good("a"), bad, good("b")]);
        let out = quality_filter(&c, &StubJudge, &RuleSet::default(), 2).unwrap();
        assert_eq!(out.corpus.ids().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].violations[0].rule, RuleId::R1);
    }

    #[test]
    fn judge_rejection_removes_sample() {
        struct Picky;
        impl JudgeClient for Picky {
            fn assess(&self, s: &Sample) -> Result<StyleVerdict> {
                Ok(if s.id == "b" {
                    StyleVerdict::from_violations(vec![Violation {
                        rule: RuleId::R3,
                        line: 1,
                        message: "fsm".into(),
                    }])
                } else {
                    StyleVerdict::pass()
                })
            }
        }
        let c = corpus(vec![good("a"), good("b")]);
        let out = quality_filter(&c, &Picky, &RuleSet::default(), 1).unwrap();
        assert_eq!(out.corpus.ids().collect::<Vec<_>>(), ["a"]);
        assert_eq!(out.rejected[0].by, "judge");
    }

    #[test]
    fn failing_judge_fails_open() {
        let c = corpus((0..6).map(|i| good(&format!("g{i}"))).collect());
        // nothing listens on port 1
        let judge = HttpJudge::new("http://127.0.0.1:1/", Duration::from_millis(200));
        let out = quality_filter(&c, &judge, &RuleSet::default(), 4).unwrap();
        assert_eq!(out.corpus.samples(), c.samples());
        assert_eq!(out.undetermined.len(), 6);
    }

    #[test]
    fn empty_solution_is_rejected_not_fatal() {
        let c = corpus(vec![good("a"), Sample::new("e", "p", "")]);
        let out = quality_filter(&c, &StubJudge, &RuleSet::default(), 1).unwrap();
        assert_eq!(out.corpus.len(), 1);
        assert!(out.corpus.len() <= c.len());
    }
}
