//! A small, total Verilog lexer.
//!
//! It only needs to be good enough for token-class statistics and the style
//! rules: every byte of input lands in exactly one token or in skipped
//! whitespace, and nothing ever fails.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenClass {
    #[serde(rename = "KW")]
    Keyword,
    #[serde(rename = "ID")]
    Identifier,
    #[serde(rename = "NUM")]
    Number,
    #[serde(rename = "STR")]
    Str,
    #[serde(rename = "OP")]
    Operator,
    #[serde(rename = "CMT")]
    Comment,
}

impl TokenClass {
    pub fn symbol(self) -> &'static str {
        match self {
            TokenClass::Keyword => "KW",
            TokenClass::Identifier => "ID",
            TokenClass::Number => "NUM",
            TokenClass::Str => "STR",
            TokenClass::Operator => "OP",
            TokenClass::Comment => "CMT",
        }
    }
}

impl fmt::Display for TokenClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub class: TokenClass,
    pub text: &'a str,
    /// 1-based line of the token's first byte.
    pub line: usize,
}

impl Token<'_> {
    pub fn is_kw(&self, kw: &str) -> bool {
        self.class == TokenClass::Keyword && self.text == kw
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.class == TokenClass::Operator && self.text == op
    }
}

// IEEE 1364-2005 reserved words plus the common SystemVerilog RTL ones.
const KEYWORDS: &[&str] = &[
    "always",
    "always_comb",
    "always_ff",
    "always_latch",
    "and",
    "assign",
    "automatic",
    "begin",
    "bit",
    "buf",
    "bufif0",
    "bufif1",
    "case",
    "casex",
    "casez",
    "cell",
    "cmos",
    "config",
    "deassign",
    "default",
    "defparam",
    "design",
    "disable",
    "edge",
    "else",
    "end",
    "endcase",
    "endconfig",
    "endfunction",
    "endgenerate",
    "endmodule",
    "endprimitive",
    "endspecify",
    "endtable",
    "endtask",
    "enum",
    "event",
    "for",
    "force",
    "forever",
    "fork",
    "function",
    "generate",
    "genvar",
    "highz0",
    "highz1",
    "if",
    "ifnone",
    "incdir",
    "include",
    "initial",
    "inout",
    "input",
    "instance",
    "int",
    "integer",
    "join",
    "large",
    "liblist",
    "library",
    "localparam",
    "logic",
    "macromodule",
    "medium",
    "module",
    "nand",
    "negedge",
    "nmos",
    "nor",
    "noshowcancelled",
    "not",
    "notif0",
    "notif1",
    "or",
    "output",
    "parameter",
    "pmos",
    "posedge",
    "primitive",
    "pull0",
    "pull1",
    "pulldown",
    "pullup",
    "pulsestyle_ondetect",
    "pulsestyle_onevent",
    "rcmos",
    "real",
    "realtime",
    "reg",
    "release",
    "repeat",
    "rnmos",
    "rpmos",
    "rtran",
    "rtranif0",
    "rtranif1",
    "scalared",
    "showcancelled",
    "signed",
    "small",
    "specify",
    "specparam",
    "strong0",
    "strong1",
    "supply0",
    "supply1",
    "table",
    "task",
    "time",
    "tran",
    "tranif0",
    "tranif1",
    "tri",
    "tri0",
    "tri1",
    "triand",
    "trior",
    "trireg",
    "typedef",
    "unique",
    "unsigned",
    "use",
    "uwire",
    "vectored",
    "wait",
    "wand",
    "weak0",
    "weak1",
    "while",
    "wire",
    "wor",
    "xnor",
    "xor",
];

// Longest first so greedy matching picks `<<<` over `<<`.
const OPERATORS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "<<<", ">>>", "<<=", ">>=", "==", "!=", "<=", ">=", "&&", "||", "**", "<<", ">>",
    "~&", "~|", "~^", "^~", "->", "+:", "-:", "::", "+=", "-=", "++", "--",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

pub fn tokenize(src: &str) -> Vec<Token<'_>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;

    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }

        let start = i;
        let start_line = line;
        let class = if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            TokenClass::Comment
        } else if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                if bytes[i] == b'\n' {
                    line += 1;
                }
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            TokenClass::Comment
        } else if b == b'"' {
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] != b'\n' {
                    i += 1;
                }
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'"' {
                i += 1;
            }
            TokenClass::Str
        } else if is_ident_start(b) {
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            if is_keyword(&src[start..i]) {
                TokenClass::Keyword
            } else {
                TokenClass::Identifier
            }
        } else if b == b'$' && bytes.get(i + 1).is_some_and(|&c| is_ident_start(c)) {
            // system task / function
            i += 1;
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            TokenClass::Identifier
        } else if b == b'`' && bytes.get(i + 1).is_some_and(|&c| is_ident_start(c)) {
            // compiler directive or macro use
            i += 1;
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            TokenClass::Keyword
        } else if b == b'\\' && bytes.get(i + 1).is_some_and(|c| !c.is_ascii_whitespace()) {
            // escaped identifier runs to whitespace
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            TokenClass::Identifier
        } else if b.is_ascii_digit() || (b == b'\'' && based_literal_follows(bytes, i)) {
            i = scan_number(bytes, i);
            TokenClass::Number
        } else {
            i += OPERATORS
                .iter()
                .find(|op| bytes[i..].starts_with(op.as_bytes()))
                .map_or_else(|| utf8_len(b), |op| op.len());
            TokenClass::Operator
        };

        // Multi-byte scalars never split: every branch above stops on ASCII
        // or at end of input.
        out.push(Token {
            class,
            text: &src[start..i],
            line: start_line,
        });
    }
    out
}

fn utf8_len(lead: u8) -> usize {
    match lead {
        0xF0..=0xF7 => 4,
        0xE0..=0xEF => 3,
        0xC0..=0xDF => 2,
        _ => 1,
    }
}

fn based_literal_follows(bytes: &[u8], i: usize) -> bool {
    let mut j = i + 1;
    if matches!(bytes.get(j), Some(b's' | b'S')) {
        j += 1;
    }
    matches!(
        bytes.get(j),
        Some(b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H')
    )
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    let digits = |i: &mut usize, ok: fn(u8) -> bool| {
        while *i < bytes.len() && (ok(bytes[*i]) || bytes[*i] == b'_') {
            *i += 1;
        }
    };
    digits(&mut i, |c| c.is_ascii_digit());
    if bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i += 1;
        digits(&mut i, |c| c.is_ascii_digit());
    }
    if matches!(bytes.get(i), Some(b'e' | b'E'))
        && bytes.get(i + 1).is_some_and(|&c| {
            c.is_ascii_digit() || ((c == b'+' || c == b'-') && bytes.get(i + 2).is_some_and(u8::is_ascii_digit))
        })
    {
        i += 2;
        digits(&mut i, |c| c.is_ascii_digit());
    }
    // optional whitespace between size and base is legal but rare; skip it
    if bytes.get(i) == Some(&b'\'') && based_literal_follows(bytes, i) {
        i += 1;
        if matches!(bytes.get(i), Some(b's' | b'S')) {
            i += 1;
        }
        i += 1; // base char
        digits(&mut i, |c| {
            c.is_ascii_hexdigit() || matches!(c, b'x' | b'X' | b'z' | b'Z' | b'?')
        });
    }
    i
}

/// Token classes for `code`, one per token.
pub fn tokenize_to_classes(code: &str) -> Vec<TokenClass> {
    tokenize(code).into_iter().map(|t| t.class).collect()
}
