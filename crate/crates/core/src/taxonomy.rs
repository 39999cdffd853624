//! Hardware-domain labels used to partition corpora before deduplication.
//!
//! The shipped taxonomy is a placeholder with fifteen labels. Classification
//! is pluggable; the default is a keyword vote over problem, description and
//! solution text.

use crate::corpus::{Corpus, Sample};
use crate::error::Result;

pub const PLACEHOLDER_DOMAINS: [&str; 15] = [
    "combinational_logic",
    "arithmetic",
    "sequential_logic",
    "counters_timers",
    "finite_state_machines",
    "memory",
    "fifo_buffering",
    "bus_interfaces",
    "serial_communication",
    "signal_processing",
    "clock_reset",
    "control_datapath",
    "encoding_decoding",
    "arbitration",
    "miscellaneous",
];

pub trait DomainClassifier: Sync {
    fn classify(&self, sample: &Sample) -> Result<String>;
}

/// Keyword vote over the lower-cased sample text. Ties go to the label
/// listed first; no hits gives `miscellaneous`.
#[derive(Debug, Clone)]
pub struct KeywordDomainClassifier {
    table: Vec<(&'static str, &'static [&'static str])>,
}

impl Default for KeywordDomainClassifier {
    fn default() -> Self {
        KeywordDomainClassifier {
            table: vec![
                (
                    "finite_state_machines",
                    &["state machine", "fsm", "next_state", "moore", "mealy"],
                ),
                ("fifo_buffering", &["fifo", "queue", "ring buffer"]),
                ("arbitration", &["arbiter", "round-robin", "round robin", "grant"]),
                ("serial_communication", &["uart", "spi", "i2c", "serial", "baud"]),
                ("bus_interfaces", &["axi", "apb", "ahb", "wishbone", "bus"]),
                ("memory", &["ram", "rom", "memory", "register file", "cache"]),
                ("counters_timers", &["counter", "timer", "prescaler"]),
                ("signal_processing", &["filter", "fir", "iir", "dsp", "pwm"]),
                ("clock_reset", &["clock divider", "synchronizer", "reset", "debounce"]),
                (
                    "encoding_decoding",
                    &["encoder", "decoder", "gray code", "parity", "crc"],
                ),
                (
                    "arithmetic",
                    &["adder", "multiplier", "alu", "subtract", "divider", "comparator"],
                ),
                (
                    "control_datapath",
                    &["datapath", "control unit", "cpu", "pipeline", "processor"],
                ),
                (
                    "sequential_logic",
                    &["flip-flop", "flip flop", "register", "latch", "shift"],
                ),
                (
                    "combinational_logic",
                    &["mux", "multiplexer", "gate", "combinational", "and gate"],
                ),
            ],
        }
    }
}

impl DomainClassifier for KeywordDomainClassifier {
    fn classify(&self, sample: &Sample) -> Result<String> {
        let text = format!("{}\n{}\n{}", sample.problem, sample.description, sample.solution).to_lowercase();
        let best = self
            .table
            .iter()
            .map(|(label, words)| (*label, words.iter().filter(|w| text.contains(*w)).count()))
            .fold(
                ("miscellaneous", 0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        Ok(best.0.to_string())
    }
}

/// Fills in missing domain labels; existing labels are left alone.
pub fn assign_domains(corpus: &Corpus, classifier: &dyn DomainClassifier) -> Result<Corpus> {
    let samples = corpus
        .samples()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if s.domain.is_none() {
                s.domain = Some(classifier.classify(&s)?);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::with_log(samples, corpus.stage_log().to_vec())
}
