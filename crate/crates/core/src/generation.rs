//! Code-generation clients.
//!
//! Token accounting is completion-only. Clients that cannot report usage
//! fall back to a whitespace-delimited token count, which is labelled as a
//! proxy wherever it is reported.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::http::JsonEndpoint;
use crate::quality::tokenize;

pub const GEN_URL_ENV: &str = "VERIFORGE_GEN_URL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.2,
            top_p: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationRequest<'a> {
    pub problem_id: &'a str,
    pub prompt: &'a str,
    pub max_new_tokens: u32,
    pub sampling: SamplingParams,
    /// Index of this candidate among the `n` drawn for a problem; real
    /// clients use it as a seed offset.
    pub candidate_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    /// Completion tokens.
    pub tokens_used: u32,
    /// True when `tokens_used` is the whitespace proxy rather than a
    /// tokenizer count reported by the model server.
    pub proxy_count: bool,
}

pub trait GenerationClient: Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<Generation>;
}

pub fn whitespace_tokens(text: &str) -> u32 {
    text.split_whitespace().count().min(u32::MAX as usize) as u32
}

/// Prefix of `text` ending after its `n`-th whitespace-delimited token.
pub fn truncate_to_tokens(text: &str, n: u32) -> &str {
    if n == 0 {
        return "";
    }
    let mut seen = 0u32;
    let mut in_token = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if in_token {
                seen += 1;
                if seen == n {
                    return &text[..i];
                }
            }
            in_token = false;
        } else {
            in_token = true;
        }
    }
    text
}

/// Pulls Verilog source out of a model response: the last fenced block that
/// contains a module, else the span from the first `module` keyword to the
/// last `endmodule`, else the whole text.
pub fn extract_verilog(text: &str) -> String {
    let mut fenced = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let Some(close) = after[body_start..].find("```") else {
            break;
        };
        fenced.push(&after[body_start..body_start + close]);
        rest = &after[body_start + close + 3..];
    }
    if let Some(block) = fenced.iter().rev().find(|b| b.contains("module")) {
        return block.trim_end().to_string() + "\n";
    }

    let toks = tokenize(text);
    let start = toks.iter().find(|t| t.is_kw("module") || t.is_kw("macromodule"));
    let end = toks.iter().rev().find(|t| t.is_kw("endmodule"));
    match (start, end) {
        (Some(s), Some(e)) => {
            let from = s.text.as_ptr() as usize - text.as_ptr() as usize;
            let to = e.text.as_ptr() as usize - text.as_ptr() as usize + e.text.len();
            if from < to {
                return text[from..to].to_string() + "\n";
            }
            text.to_string()
        }
        _ => text.to_string(),
    }
}

/// Offline stand-in that answers with each problem's reference solution,
/// preceded by filler reasoning sized to a quarter of the token budget.
#[derive(Debug, Clone)]
pub struct ReferenceGenerator {
    references: HashMap<String, String>,
    reasoning_share: f64,
}

impl ReferenceGenerator {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        ReferenceGenerator {
            references: corpus
                .samples()
                .iter()
                .map(|s| (s.id.clone(), s.solution.clone()))
                .collect(),
            reasoning_share: 0.25,
        }
    }

    pub fn with_reasoning_share(mut self, share: f64) -> Self {
        self.reasoning_share = share.clamp(0.0, 1.0);
        self
    }
}

impl GenerationClient for ReferenceGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<Generation> {
        let reference = self
            .references
            .get(req.problem_id)
            .ok_or_else(|| Error::Transport(format!("no reference for problem {}", req.problem_id)))?;
        let words = (f64::from(req.max_new_tokens) * self.reasoning_share) as usize;
        let mut text = String::new();
        if words > 0 {
            text.push_str("Reasoning:");
            for i in 0..words.saturating_sub(1) {
                text.push_str(&format!(" s{i}"));
            }
            text.push('\n');
        }
        text.push_str(reference);
        Ok(Generation {
            tokens_used: whitespace_tokens(&text),
            text,
            proxy_count: true,
        })
    }
}

/// Wraps a closure as a client; handy for scripted generators.
pub struct FnGenerator<F>(pub F);

impl<F> GenerationClient for FnGenerator<F>
where
    F: Fn(&GenerationRequest) -> Result<Generation> + Sync,
{
    fn generate(&self, req: &GenerationRequest) -> Result<Generation> {
        (self.0)(req)
    }
}

#[derive(Serialize)]
struct HttpGenRequest<'a> {
    problem_id: &'a str,
    prompt: &'a str,
    max_new_tokens: u32,
    temperature: f64,
    top_p: f64,
    seed: u32,
}

#[derive(Deserialize)]
struct HttpGenReply {
    text: String,
    #[serde(default)]
    tokens_used: Option<u32>,
}

/// POSTs `{problem_id, prompt, max_new_tokens, temperature, top_p, seed}` and
/// expects `{"text": ..., "tokens_used": ...}`; `tokens_used` is optional.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: JsonEndpoint,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpGenerator {
            endpoint: JsonEndpoint::new(url, timeout),
        }
    }

    pub fn from_env(timeout: Duration) -> Result<Self> {
        Ok(HttpGenerator {
            endpoint: JsonEndpoint::from_env(GEN_URL_ENV, timeout)?,
        })
    }
}

impl GenerationClient for HttpGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<Generation> {
        let reply: HttpGenReply = self.endpoint.post(&HttpGenRequest {
            problem_id: req.problem_id,
            prompt: req.prompt,
            max_new_tokens: req.max_new_tokens,
            temperature: req.sampling.temperature,
            top_p: req.sampling.top_p,
            seed: req.candidate_index,
        })?;
        Ok(match reply.tokens_used {
            Some(t) => Generation {
                text: reply.text,
                tokens_used: t,
                proxy_count: false,
            },
            None => Generation {
                tokens_used: whitespace_tokens(&reply.text),
                text: reply.text,
                proxy_count: true,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;
    use crate::http::testserver::serve;

    #[test]
    fn whitespace_proxy() {
        assert_eq!(whitespace_tokens(""), 0);
        assert_eq!(whitespace_tokens("  a\tb\n c  "), 3);
    }

    #[test]
    fn truncation_keeps_first_n_tokens() {
        assert_eq!(truncate_to_tokens("a bb  ccc d", 2), "a bb");
        assert_eq!(truncate_to_tokens("a bb", 5), "a bb");
        assert_eq!(truncate_to_tokens("a bb", 0), "");
        let t = truncate_to_tokens("x y z w", 3);
        assert_eq!(whitespace_tokens(t), 3);
    }

    #[test]
    fn extraction_prefers_fenced_block() {
        let text = "Think first.\n```verilog\nmodule a; endmodule\n```\nthen\n```\nmodule b; endmodule\n```\n";
        assert_eq!(extract_verilog(text), "module b; endmodule\n");
        let text = "Reasoning: add them.\nmodule add(input a, output y); assign y = a; endmodule trailing words";
        assert_eq!(
            extract_verilog(text),
            "module add(input a, output y); assign y = a; endmodule\n"
        );
        assert_eq!(extract_verilog("no code here"), "no code here");
    }

    #[test]
    fn reference_generator_sizes_reasoning_to_budget() {
        let c = Corpus::new(vec![Sample::new("p", "x", "module m; endmodule")]).unwrap();
        let g = ReferenceGenerator::from_corpus(&c);
        let req = |b| GenerationRequest {
            problem_id: "p",
            prompt: "x",
            max_new_tokens: b,
            sampling: SamplingParams::default(),
            candidate_index: 0,
        };
        let small = g.generate(&req(512)).unwrap();
        let big = g.generate(&req(4096)).unwrap();
        assert_eq!(small.tokens_used, 128 + 3);
        assert_eq!(big.tokens_used, 1024 + 3);
        assert_eq!(extract_verilog(&big.text), "module m; endmodule\n");
        assert!(g
            .generate(&GenerationRequest {
                problem_id: "zz",
                ..req(8)
            })
            .is_err());
    }

    #[test]
    fn http_generator_reports_usage() {
        let srv = serve(
            vec![
                r#"{"text":"module m; endmodule","tokens_used":42}"#.into(),
                r#"{"text":"a b c"}"#.into(),
            ],
            Duration::ZERO,
        );
        let g = HttpGenerator::new(&srv.url, Duration::from_secs(5));
        let req = GenerationRequest {
            problem_id: "p1",
            prompt: "hello",
            max_new_tokens: 512,
            sampling: SamplingParams::default(),
            candidate_index: 3,
        };
        let a = g.generate(&req).unwrap();
        assert_eq!((a.tokens_used, a.proxy_count), (42, false));
        let body = srv.requests.recv().unwrap();
        assert!(
            body.contains(r#""temperature":0.2"#) && body.contains(r#""top_p":0.95"#) && body.contains(r#""seed":3"#)
        );
        let b = g.generate(&req).unwrap();
        assert_eq!((b.tokens_used, b.proxy_count), (3, true));
    }
}
