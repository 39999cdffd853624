use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Completion tokens for each generation in one mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub counts: Vec<u64>,
    /// Set when any count came from the whitespace proxy.
    pub proxy: bool,
}

impl TokenUsage {
    pub fn new(counts: Vec<u64>) -> Self {
        TokenUsage { counts, proxy: false }
    }

    pub fn record(&mut self, tokens: u64, proxy: bool) {
        self.counts.push(tokens);
        self.proxy |= proxy;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn mean_tokens(&self) -> Option<f64> {
        if self.counts.is_empty() {
            None
        } else {
            Some(self.total() as f64 / self.counts.len() as f64)
        }
    }

    /// `(self - base) / base` as a fraction; `None` when either side is
    /// empty or the baseline mean is zero.
    pub fn relative_to(&self, base: &TokenUsage) -> Option<f64> {
        let b = base.mean_tokens()?;
        let s = self.mean_tokens()?;
        (b != 0.0).then(|| (s - b) / b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub mode: String,
    pub mean_tokens: f64,
    /// Change against the baseline mean as a fraction.
    pub delta: f64,
    /// `delta` in whole percent, rounded half away from zero.
    pub delta_percent: i64,
    pub pass_at_1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTable {
    pub baseline: String,
    pub proxy_tokens: bool,
    pub rows: Vec<EfficiencyRow>,
}

pub fn format_percent(p: i64) -> String {
    if p < 0 {
        format!("-{}%", -p)
    } else {
        format!("+{p}%")
    }
}

/// One row per mode with mean tokens and the change against `baseline`.
/// `pass_at_1` may be supplied per mode for display.
pub fn efficiency_report(modes: &[(String, TokenUsage, Option<f64>)], baseline: &str) -> Result<EfficiencyTable> {
    let base = modes
        .iter()
        .find(|(m, _, _)| m == baseline)
        .ok_or_else(|| Error::argument(format!("baseline mode {baseline:?} not among the reported modes")))?;
    let base_mean = base
        .1
        .mean_tokens()
        .ok_or_else(|| Error::argument(format!("baseline mode {baseline:?} has an empty usage list")))?;
    if base_mean == 0.0 {
        return Err(Error::argument(format!(
            "baseline mode {baseline:?} has zero mean tokens"
        )));
    }
    let mut rows = Vec::with_capacity(modes.len());
    for (mode, usage, p1) in modes {
        let mean = usage
            .mean_tokens()
            .ok_or_else(|| Error::argument(format!("mode {mode:?} has an empty usage list")))?;
        let delta = (mean - base_mean) / base_mean;
        rows.push(EfficiencyRow {
            mode: mode.clone(),
            mean_tokens: mean,
            delta,
            delta_percent: (delta * 100.0).round() as i64,
            pass_at_1: *p1,
        });
    }
    Ok(EfficiencyTable {
        baseline: baseline.to_string(),
        proxy_tokens: modes.iter().any(|(_, u, _)| u.proxy),
        rows,
    })
}

impl fmt::Display for EfficiencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8} {:>12} {:>8}", "mode", "pass@1", "mean_tokens", "delta")?;
        for r in &self.rows {
            let p1 = r.pass_at_1.map_or("-".to_string(), |p| format!("{:.1}", p * 100.0));
            let delta = if r.mode == self.baseline {
                "(base)".to_string()
            } else {
                format_percent(r.delta_percent)
            };
            writeln!(f, "{:<10} {:>8} {:>12.1} {:>8}", r.mode, p1, r.mean_tokens, delta)?;
        }
        if self.proxy_tokens {
            writeln!(
                f,
                "token counts: whitespace-delimited proxy, not model tokenizer counts"
            )?;
        }
        Ok(())
    }
}
