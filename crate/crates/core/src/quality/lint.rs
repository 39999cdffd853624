//! Deterministic RTL style rules.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Token, TokenClass};
use crate::corpus::Sample;
use crate::error::{Error, Result};

pub const DEFAULT_RULES_TOML: &str = include_str!("../../assets/rules/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleVerdict {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl StyleVerdict {
    pub fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by_key(|a| (a.line, a.rule));
        StyleVerdict {
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn pass() -> Self {
        Self::from_violations(Vec::new())
    }
}

#[derive(Debug, Deserialize)]
struct RulesFile {
    version: String,
    module_name_pattern: String,
    #[serde(default)]
    rules: BTreeMap<RuleId, bool>,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: String,
    enabled: HashSet<RuleId>,
    module_name: Regex,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::from_toml(DEFAULT_RULES_TOML).expect("bundled rules file is valid")
    }
}

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: RulesFile = toml::from_str(text).map_err(|e| Error::Config(format!("rules file: {e}")))?;
        let module_name =
            Regex::new(&f.module_name_pattern).map_err(|e| Error::Config(format!("module_name_pattern: {e}")))?;
        Ok(RuleSet {
            version: f.version,
            enabled: f.rules.into_iter().filter(|(_, on)| *on).map(|(r, _)| r).collect(),
            module_name,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn is_enabled(&self, rule: RuleId) -> bool {
        self.enabled.contains(&rule)
    }

    pub fn with_only(mut self, rules: &[RuleId]) -> Self {
        self.enabled = rules.iter().copied().collect();
        self
    }
}

/// Checks `sample.solution` against the enabled rules.
pub fn style_lint(sample: &Sample, rules: &RuleSet) -> Result<StyleVerdict> {
    if sample.solution.trim().is_empty() {
        return Err(Error::argument(format!("sample {} has an empty solution", sample.id)));
    }
    Ok(lint_source(&sample.solution, rules))
}

pub fn lint_source(src: &str, rules: &RuleSet) -> StyleVerdict {
    let toks: Vec<Token> = tokenize(src)
        .into_iter()
        .filter(|t| t.class != TokenClass::Comment)
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].is_kw("module") || toks[i].is_kw("macromodule") {
            let end = (i + 1..toks.len())
                .find(|&j| toks[j].is_kw("endmodule"))
                .unwrap_or(toks.len());
            check_module(&toks[i..end], rules, &mut out);
            i = end + 1;
        } else {
            i += 1;
        }
    }
    StyleVerdict::from_violations(out)
}

/// `toks` runs from the `module` keyword up to (not including) `endmodule`.
fn check_module(toks: &[Token], rules: &RuleSet, out: &mut Vec<Violation>) {
    let Some(name) = toks.get(1).filter(|t| t.class == TokenClass::Identifier) else {
        return;
    };
    if rules.is_enabled(RuleId::R1) && !rules.module_name.is_match(name.text) {
        out.push(Violation {
            rule: RuleId::R1,
            line: toks[0].line,
            message: format!("module name `{}` is not lower_snake_case", name.text),
        });
    }

    let mut i = 2;
    if toks.get(i).is_some_and(|t| t.is_op("#")) {
        i = group_end(toks, i + 1);
    }
    let mut ports = Vec::new();
    if toks.get(i).is_some_and(|t| t.is_op("(")) {
        let close = group_end(toks, i);
        ports = header_ports(&toks[i + 1..close.saturating_sub(1).max(i + 1)]);
        i = close;
    }
    let body_start = (i..toks.len())
        .find(|&j| toks[j].is_op(";"))
        .map_or(toks.len(), |j| j + 1);
    let body = &toks[body_start..];

    if rules.is_enabled(RuleId::R2) || rules.is_enabled(RuleId::R3) {
        check_blocks(body, rules, out);
    }
    if rules.is_enabled(RuleId::R4) {
        check_ports(&ports, body, out);
    }
}

/// Index just past the bracket group opening at `open` (or `open` itself
/// if it is not an opening bracket).
fn group_end(toks: &[Token], open: usize) -> usize {
    let Some(first) = toks.get(open) else { return open };
    let (lhs, rhs) = match first.text {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        "{" => ("{", "}"),
        _ => return open,
    };
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if t.is_op(lhs) {
            depth += 1;
        } else if t.is_op(rhs) {
            depth -= 1;
            if depth == 0 {
                return j + 1;
            }
        }
    }
    toks.len()
}

/// Port names from the inside of a header's port list: for each
/// comma-separated item, the last identifier outside brackets and before
/// any default value.
fn header_ports<'a>(inner: &[Token<'a>]) -> Vec<Token<'a>> {
    let mut ports = Vec::new();
    let mut current: Option<Token> = None;
    let mut depth = 0i32;
    let mut after_eq = false;
    for t in inner {
        match t.text {
            "(" | "[" | "{" if t.class == TokenClass::Operator => depth += 1,
            ")" | "]" | "}" if t.class == TokenClass::Operator => depth -= 1,
            "," if depth == 0 && t.class == TokenClass::Operator => {
                ports.extend(current.take());
                after_eq = false;
            }
            "=" if depth == 0 => after_eq = true,
            _ if depth == 0 && !after_eq && t.class == TokenClass::Identifier => current = Some(*t),
            _ => {}
        }
    }
    ports.extend(current);
    ports
}

fn check_ports(ports: &[Token], body: &[Token], out: &mut Vec<Violation>) {
    let mut used: HashSet<&str> = HashSet::new();
    let mut i = 0;
    while i < body.len() {
        let t = &body[i];
        if t.is_kw("input") || t.is_kw("output") || t.is_kw("inout") {
            // skip the declaration statement itself
            while i < body.len() && !body[i].is_op(";") {
                i += 1;
            }
            continue;
        }
        if t.class == TokenClass::Identifier {
            used.insert(t.text);
        }
        i += 1;
    }
    let mut seen = HashSet::new();
    for p in ports {
        if seen.insert(p.text) && !used.contains(p.text) {
            out.push(Violation {
                rule: RuleId::R4,
                line: p.line,
                message: format!("port `{}` is declared but never referenced", p.text),
            });
        }
    }
}

fn check_blocks(body: &[Token], rules: &RuleSet, out: &mut Vec<Violation>) {
    let mut i = 0;
    while i < body.len() {
        let t = &body[i];
        if t.class == TokenClass::Keyword && t.text.starts_with("always") {
            let mut j = i + 1;
            let mut clocked = t.text == "always_ff";
            if body.get(j).is_some_and(|t| t.is_op("@")) {
                let ctl_end = if body.get(j + 1).is_some_and(|t| t.is_op("(")) {
                    group_end(body, j + 1)
                } else {
                    (j + 2).min(body.len())
                };
                clocked |= body[j..ctl_end]
                    .iter()
                    .any(|t| t.is_kw("posedge") || t.is_kw("negedge"));
                j = ctl_end;
            }
            let end = stmt_end(body, j);
            let block = &body[j..end];
            if rules.is_enabled(RuleId::R2) {
                delays(block, out);
            }
            if clocked && rules.is_enabled(RuleId::R3) {
                let mut depth = 0i32;
                for t in block {
                    match t.text {
                        "(" | "[" | "{" if t.class == TokenClass::Operator => depth += 1,
                        ")" | "]" | "}" if t.class == TokenClass::Operator => depth -= 1,
                        "=" if depth == 0 && t.class == TokenClass::Operator => out.push(Violation {
                            rule: RuleId::R3,
                            line: t.line,
                            message: "blocking assignment in clocked always block; use <=".into(),
                        }),
                        _ => {}
                    }
                }
            }
            i = end.max(i + 1);
        } else if t.is_kw("assign") {
            let end = (i..body.len())
                .find(|&j| body[j].is_op(";"))
                .map_or(body.len(), |j| j + 1);
            if rules.is_enabled(RuleId::R2) {
                delays(&body[i..end], out);
            }
            i = end;
        } else {
            i += 1;
        }
    }
}

fn delays(toks: &[Token], out: &mut Vec<Violation>) {
    for t in toks.iter().filter(|t| t.is_op("#")) {
        out.push(Violation {
            rule: RuleId::R2,
            line: t.line,
            message: "delay control in synthesizable logic".into(),
        });
    }
}

/// Index just past the statement starting at `i`.
fn stmt_end(toks: &[Token], i: usize) -> usize {
    let Some(t) = toks.get(i) else { return i };
    match (t.class, t.text) {
        (TokenClass::Keyword, "begin") | (TokenClass::Keyword, "fork") => {
            let mut depth = 0usize;
            for (j, t) in toks.iter().enumerate().skip(i) {
                if t.is_kw("begin") || t.is_kw("fork") {
                    depth += 1;
                } else if t.is_kw("end") || t.is_kw("join") {
                    depth -= 1;
                    if depth == 0 {
                        return j + 1;
                    }
                }
            }
            toks.len()
        }
        (TokenClass::Keyword, "case" | "casex" | "casez") => {
            let mut depth = 0usize;
            for (j, t) in toks.iter().enumerate().skip(i) {
                if t.class == TokenClass::Keyword && matches!(t.text, "case" | "casex" | "casez") {
                    depth += 1;
                } else if t.is_kw("endcase") {
                    depth -= 1;
                    if depth == 0 {
                        return j + 1;
                    }
                }
            }
            toks.len()
        }
        (TokenClass::Keyword, "if") => {
            let after = stmt_end(toks, group_end(toks, i + 1));
            if toks.get(after).is_some_and(|t| t.is_kw("else")) {
                stmt_end(toks, after + 1)
            } else {
                after
            }
        }
        (TokenClass::Keyword, "for" | "while" | "repeat") => stmt_end(toks, group_end(toks, i + 1)),
        (TokenClass::Keyword, "forever") => stmt_end(toks, i + 1),
        (TokenClass::Operator, "@") => {
            let next = if toks.get(i + 1).is_some_and(|t| t.is_op("(")) {
                group_end(toks, i + 1)
            } else {
                i + 2
            };
            stmt_end(toks, next.min(toks.len()))
        }
        (TokenClass::Operator, "#") => {
            let next = if toks.get(i + 1).is_some_and(|t| t.is_op("(")) {
                group_end(toks, i + 1)
            } else {
                i + 2
            };
            stmt_end(toks, next.min(toks.len()))
        }
        _ => (i..toks.len())
            .find(|&j| toks[j].is_op(";"))
            .map_or(toks.len(), |j| j + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = "\
module counter (
    input  wire       clk,
    input  wire       rst,
    input  wire       en,
    output reg  [3:0] count
);
    always @(posedge clk) begin
        if (rst)
            count <= 4'd0;
        else if (en)
            count <= count + 4'd1;
    end
endmodule
";

    fn lint(src: &str) -> StyleVerdict {
        lint_source(src, &RuleSet::default())
    }

    fn rules_of(v: &StyleVerdict) -> Vec<(RuleId, usize)> {
        v.violations.iter().map(|v| (v.rule, v.line)).collect()
    }

    #[test]
    fn clean_counter_passes() {
        let v = lint(COUNTER);
        assert!(v.passed, "{:?}", v.violations);
    }

    #[test]
    fn camel_case_module_name() {
        let src = COUNTER.replace("module counter", "module MyCounter");
        assert_eq!(rules_of(&lint(&src)), vec![(RuleId::R1, 1)]);
        let src = format!("// header\n\n{}", COUNTER.replace("module counter", "module Counter_2"));
        assert_eq!(rules_of(&lint(&src)), vec![(RuleId::R1, 3)]);
    }

    #[test]
    fn delays_in_synthesizable_code() {
        let src = "module d(input a, output y, output reg z);\n  assign #2 y = a;\n  always @* begin\n    #1 z = a;\n  end\nendmodule\n";
        assert_eq!(rules_of(&lint(src)), vec![(RuleId::R2, 2), (RuleId::R2, 4)]);
        // delays inside initial blocks are not flagged
        let src = "module tb;\n  reg a;\n  initial begin #5 a = 1; end\nendmodule\n";
        assert!(lint(src).passed);
    }

    #[test]
    fn blocking_assignment_in_clocked_block() {
        let src = COUNTER.replace("count <= count + 4'd1", "count = count + 4'd1");
        assert_eq!(rules_of(&lint(&src)), vec![(RuleId::R3, 11)]);
        // combinational blocks may use '='
        let src = "module c(input a, input b, output reg y);\n  always @(*) y = a & b;\nendmodule\n";
        assert!(lint(src).passed);
        // loop headers are not assignments to state
        let src = "module r(input clk, input [3:0] d, output reg [3:0] q);\n  integer i;\n  always @(posedge clk)\n    for (i = 0; i < 4; i = i + 1) q[i] <= d[i];\nendmodule\n";
        assert!(lint(src).passed, "{:?}", lint(src).violations);
    }

    #[test]
    fn single_statement_clocked_block_ends_at_semicolon() {
        let src = "module s(input clk, input d, output reg q, output y);\n  always @(posedge clk) q <= d;\n  assign y = q;\nendmodule\n";
        assert!(lint(src).passed, "{:?}", lint(src).violations);
    }

    #[test]
    fn unused_port() {
        let src = COUNTER.replace(
            "input  wire       en,",
            "input  wire       en,\n    input  wire       spare,",
        );
        let v = lint(&src);
        assert_eq!(rules_of(&v), vec![(RuleId::R4, 5)]);
        assert!(v.violations[0].message.contains("spare"));
    }

    #[test]
    fn non_ansi_ports() {
        let src = "module and2(a, b, y);\n  input a;\n  input b;\n  output y;\n  assign y = a & b;\nendmodule\n";
        assert!(lint(src).passed, "{:?}", lint(src).violations);
        let src = "module and2(a, b, y);\n  input a, b;\n  output y;\n  assign y = a;\nendmodule\n";
        assert_eq!(rules_of(&lint(src)), vec![(RuleId::R4, 1)]);
    }

    #[test]
    fn parameterized_header() {
        let src = "module shifter #(parameter W = 8) (input [W-1:0] d, input [2:0] s, output [W-1:0] q);\n  assign q = d << s;\nendmodule\n";
        assert!(lint(src).passed, "{:?}", lint(src).violations);
    }

    #[test]
    fn rules_can_be_disabled() {
        let src = COUNTER.replace("module counter", "module MyCounter");
        let only_r4 = RuleSet::default().with_only(&[RuleId::R4]);
        assert!(lint_source(&src, &only_r4).passed);
        let cfg = "version = \"t\"\nmodule_name_pattern = \"^[A-Z]\"\n[rules]\nR1 = true\n";
        let rs = RuleSet::from_toml(cfg).unwrap();
        assert!(lint_source(&src, &rs).passed);
        assert!(!lint_source(COUNTER, &rs).passed);
    }

    #[test]
    fn bad_rules_file() {
        assert!(matches!(RuleSet::from_toml("version = 1"), Err(Error::Config(_))));
        assert!(matches!(
            RuleSet::from_toml("version = \"1\"\nmodule_name_pattern = \"(\""),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_solution_is_argument_error() {
        let s = Sample::new("e", "p", "  ");
        assert!(matches!(style_lint(&s, &RuleSet::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn multiple_modules_checked_independently() {
        let src = format!("{COUNTER}\nmodule Top(input x, output y);\n  assign y = x;\nendmodule\n");
        assert_eq!(rules_of(&lint(&src)), vec![(RuleId::R1, 15)]);
    }
}
