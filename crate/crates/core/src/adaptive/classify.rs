use std::path::Path;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::Difficulty;
use crate::error::{Error, Result};
use crate::http::JsonEndpoint;

pub const CLASSIFIER_URL_ENV: &str = "VERIFORGE_CLASSIFIER_URL";
pub const DEFAULT_DIFFICULTY_TOML: &str = include_str!("../../assets/difficulty.toml");

pub trait DifficultyClassifier: Sync {
    fn classify(&self, problem: &str) -> Result<Difficulty>;
}

/// Always answers with the same label.
#[derive(Debug, Clone, Copy)]
pub struct FixedClassifier(pub Difficulty);

impl DifficultyClassifier for FixedClassifier {
    fn classify(&self, _problem: &str) -> Result<Difficulty> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub word: f64,
    pub keyword: f64,
    pub port: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub easy_below: f64,
    pub medium_below: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct Keywords {
    families: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
struct HeuristicFile {
    version: String,
    weights: Weights,
    thresholds: Thresholds,
    keywords: Keywords,
}

/// Scores a problem by length, structural keyword families and port
/// mentions, then buckets the score with two thresholds.
#[derive(Debug, Clone)]
pub struct HeuristicClassifier {
    pub version: String,
    pub weights: Weights,
    pub thresholds: Thresholds,
    families: Vec<Vec<Regex>>,
    port: Regex,
}

impl Default for HeuristicClassifier {
    fn default() -> Self {
        Self::from_toml(DEFAULT_DIFFICULTY_TOML).expect("shipped difficulty config is valid")
    }
}

fn phrase_regex(phrase: &str) -> Result<Regex> {
    let words: Vec<String> = phrase.split_whitespace().map(regex::escape).collect();
    Regex::new(&format!(r"(?i)\b{}\b", words.join(r"\s+")))
        .map_err(|e| Error::Config(format!("keyword {phrase:?}: {e}")))
}

impl HeuristicClassifier {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: HeuristicFile = toml::from_str(text).map_err(|e| Error::Config(format!("difficulty config: {e}")))?;
        let mut c = HeuristicClassifier {
            version: f.version,
            weights: f.weights,
            thresholds: f.thresholds,
            families: Vec::new(),
            port: Regex::new(r"(?i)\b(input|output|inout)s?\b").expect("static regex"),
        };
        for fam in &f.keywords.families {
            c.families
                .push(fam.iter().map(|p| phrase_regex(p)).collect::<Result<_>>()?);
        }
        c.set_thresholds(f.thresholds.easy_below, f.thresholds.medium_below)?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn set_thresholds(&mut self, easy_below: f64, medium_below: f64) -> Result<()> {
        if !(easy_below.is_finite() && medium_below.is_finite() && easy_below <= medium_below) {
            return Err(Error::Config(format!(
                "difficulty thresholds must satisfy s1 <= s2 (got {easy_below}, {medium_below})"
            )));
        }
        self.thresholds = Thresholds {
            easy_below,
            medium_below,
        };
        Ok(())
    }

    pub fn score(&self, problem: &str) -> f64 {
        let words = problem.split_whitespace().count() as f64;
        let families = self
            .families
            .iter()
            .filter(|fam| fam.iter().any(|re| re.is_match(problem)))
            .count() as f64;
        let ports = self.port.find_iter(problem).count() as f64;
        self.weights.word * words + self.weights.keyword * families + self.weights.port * ports
    }

    pub fn label(&self, problem: &str) -> Difficulty {
        let s = self.score(problem);
        if s < self.thresholds.easy_below {
            Difficulty::Easy
        } else if s < self.thresholds.medium_below {
            Difficulty::Medium
        } else {
            Difficulty::Hard
        }
    }
}

impl DifficultyClassifier for HeuristicClassifier {
    fn classify(&self, problem: &str) -> Result<Difficulty> {
        Ok(self.label(problem))
    }
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    problem: &'a str,
}

#[derive(Deserialize)]
struct ClassifyReply {
    difficulty: Difficulty,
}

/// POSTs `{"problem": ...}` and expects `{"difficulty": "easy"|"medium"|"hard"}`.
#[derive(Debug, Clone)]
pub struct HttpClassifier {
    endpoint: JsonEndpoint,
}

impl HttpClassifier {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpClassifier {
            endpoint: JsonEndpoint::new(url, timeout),
        }
    }

    pub fn from_env(timeout: Duration) -> Result<Self> {
        Ok(HttpClassifier {
            endpoint: JsonEndpoint::from_env(CLASSIFIER_URL_ENV, timeout)?,
        })
    }
}

impl DifficultyClassifier for HttpClassifier {
    fn classify(&self, problem: &str) -> Result<Difficulty> {
        let r: ClassifyReply = self.endpoint.post(&ClassifyRequest { problem })?;
        Ok(r.difficulty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::testserver::serve;
    use proptest::prelude::*;

    fn long_spec() -> String {
        let mut s = String::from(
            "Design a packet buffer controller. A state machine tracks idle, fill and drain phases, \
             and a FIFO of depth 16 stores incoming bytes. ",
        );
        while s.split_whitespace().count() < 400 {
            s.push_str("The controller must respect back-pressure from the downstream consumer at all times. ");
        }
        s
    }

    #[test]
    fn shipped_examples() {
        let h = HeuristicClassifier::default();
        assert_eq!(h.label("implement a 2-input AND gate"), Difficulty::Easy);
        assert_eq!(h.label(&long_spec()), Difficulty::Hard);
        assert_eq!(h.label(""), Difficulty::Easy);
        let medium = "Implement a pipelined 8-bit multiplier with input a, input b and output p. \
                      Register the partial products in two stages and assert valid when the result is ready.";
        assert_eq!(h.label(medium), Difficulty::Medium);
    }

    #[test]
    fn score_components() {
        let h = HeuristicClassifier::default();
        // 4 words, no families, one port mention
        assert!((h.score("one input two three") - (4.0 * 0.02 + 0.25)).abs() < 1e-12);
        // a family counts once however many of its phrases appear
        let s = h.score("fifo queue");
        assert!((s - (2.0 * 0.02 + 2.0)).abs() < 1e-12);
        assert!(h.score("State   Machine") >= 2.0);
    }

    #[test]
    fn thresholds_are_configurable() {
        let mut h = HeuristicClassifier::default();
        h.set_thresholds(0.0, 0.0).unwrap();
        assert_eq!(h.label("and gate"), Difficulty::Hard);
        assert!(h.set_thresholds(3.0, 1.0).is_err());
        assert!(HeuristicClassifier::from_toml("version = 1").is_err());
    }

    #[test]
    fn http_classifier() {
        let srv = serve(vec![r#"{"difficulty":"hard"}"#.into()], Duration::ZERO);
        let c = HttpClassifier::new(&srv.url, Duration::from_secs(5));
        assert_eq!(c.classify("x").unwrap(), Difficulty::Hard);
        assert!(srv.requests.recv().unwrap().contains(r#""problem":"x""#));
        let c = HttpClassifier::new("http://127.0.0.1:9/", Duration::from_millis(300));
        assert!(matches!(c.classify("x"), Err(Error::Transport(_))));
    }

    proptest! {
        #[test]
        fn heuristic_is_pure(words in proptest::collection::vec("[a-z]{1,8}|fifo|fsm|input|pipeline", 0..200)) {
            use std::sync::OnceLock;
            static PAIR: OnceLock<(HeuristicClassifier, HeuristicClassifier)> = OnceLock::new();
            let (h, other) = PAIR.get_or_init(|| (HeuristicClassifier::default(), HeuristicClassifier::default()));
            let text = words.join(" ");
            let first = h.label(&text);
            for _ in 0..5 {
                prop_assert_eq!(h.label(&text), first);
                prop_assert_eq!(other.label(&text), first);
            }
        }
    }
}
