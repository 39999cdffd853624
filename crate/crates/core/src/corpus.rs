//! Sample schema, the corpus container, and JSONL persistence.
//!
//! A corpus file holds one JSON object per line. `id`, `problem` and
//! `solution` are required; the remaining schema keys default when absent
//! and are always written back out (optional values as explicit `null`).
//! Keys outside the schema are carried through untouched.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One corpus entry in problem / description / reasoning path / solution /
/// testbench form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub problem: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub reasoning_path: String,
    pub solution: String,
    #[serde(default)]
    pub testbench: String,
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default)]
    pub quality_score: Option<f64>,
    #[serde(default)]
    pub provenance: Option<String>,
    /// Set once the sample has passed simulation against its testbench.
    #[serde(default)]
    pub verified: bool,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Sample {
    pub fn new(id: impl Into<String>, problem: impl Into<String>, solution: impl Into<String>) -> Self {
        Sample {
            id: id.into(),
            problem: problem.into(),
            description: String::new(),
            reasoning_path: String::new(),
            solution: solution.into(),
            testbench: String::new(),
            domain: None,
            quality_score: None,
            provenance: None,
            verified: false,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_testbench(mut self, testbench: impl Into<String>) -> Self {
        self.testbench = testbench.into();
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn with_quality(mut self, score: f64) -> Self {
        self.quality_score = Some(score);
        self
    }

    /// Problem statement followed by the detailed description, if any.
    pub fn prompt_text(&self) -> String {
        if self.description.trim().is_empty() {
            self.problem.clone()
        } else {
            format!("{}\n\n{}", self.problem, self.description)
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("sample id is empty".into());
        }
        if let Some(q) = self.quality_score {
            if !(0.0..=1.0).contains(&q) {
                return Err(format!("quality_score {q} outside [0, 1]"));
            }
        }
        if self.verified && self.testbench.trim().is_empty() {
            return Err(format!("sample {} is marked verified but has no testbench", self.id));
        }
        Ok(())
    }
}

/// One row of the filtering funnel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub input: usize,
    pub output: usize,
}

impl StageRecord {
    pub fn new(stage: impl Into<String>, input: usize, output: usize) -> Self {
        StageRecord {
            stage: stage.into(),
            input,
            output,
        }
    }

    /// Fraction removed by this stage, `1 - output/input`.
    pub fn reduction(&self) -> f64 {
        if self.input == 0 {
            0.0
        } else {
            1.0 - self.output as f64 / self.input as f64
        }
    }
}

/// An ordered, id-unique collection of samples plus the log of stages that
/// produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    samples: Vec<Sample>,
    stage_log: Vec<StageRecord>,
}

impl Corpus {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        Self::with_log(samples, Vec::new())
    }

    pub fn with_log(samples: Vec<Sample>, stage_log: Vec<StageRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            s.check().map_err(Error::Integrity)?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::integrity(format!("duplicate sample id {:?}", s.id)));
            }
        }
        Ok(Corpus { samples, stage_log })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn stage_log(&self) -> &[StageRecord] {
        &self.stage_log
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// Same samples, replacement log.
    pub fn replace_log(&self, stage_log: Vec<StageRecord>) -> Corpus {
        Corpus {
            samples: self.samples.clone(),
            stage_log,
        }
    }

    /// Keeps the samples for which `keep` returns true, preserving order.
    /// The stage log is carried over unchanged.
    pub fn retain_by(&self, mut keep: impl FnMut(&Sample) -> bool) -> Corpus {
        Corpus {
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
            stage_log: self.stage_log.clone(),
        }
    }

    /// Splits into per-domain sub-corpora; samples without a domain label
    /// share one bucket keyed by `None`. Order within each bucket follows
    /// the corpus order.
    pub fn partition_by_domain(&self) -> BTreeMap<Option<String>, Vec<&Sample>> {
        let mut out: BTreeMap<Option<String>, Vec<&Sample>> = BTreeMap::new();
        for s in &self.samples {
            out.entry(s.domain.clone()).or_default().push(s);
        }
        out
    }

    /// `1 - final/initial` over the whole stage log.
    pub fn cumulative_reduction(&self) -> Option<f64> {
        let first = self.stage_log.first()?;
        let last = self.stage_log.last()?;
        if first.input == 0 {
            return Some(0.0);
        }
        Some(1.0 - last.output as f64 / first.input as f64)
    }
}

/// Reads a JSONL corpus. Blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut samples = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        sample.check().map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        })?;
        if let Some(prev) = first_line.insert(sample.id.clone(), lineno) {
            return Err(Error::integrity(format!(
                "{}: duplicate sample id {:?} on lines {prev} and {lineno}",
                path.display(),
                sample.id
            )));
        }
        samples.push(sample);
    }

    let n = samples.len();
    Ok(Corpus {
        samples,
        stage_log: vec![StageRecord::new("ingest", n, n)],
    })
}

/// Writes one JSON object per line. The stage log is not part of the corpus
/// file; callers persist it separately.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in &corpus.samples {
        let line = serde_json::to_string(s).map_err(|e| Error::integrity(e.to_string()))?;
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Returns `output` carrying `input`'s stage log extended by
/// `(stage, |input|, |output|)`.
pub fn record_stage(input: &Corpus, stage: &str, output: Corpus) -> Result<Corpus> {
    let known: HashSet<&str> = input.ids().collect();
    if let Some(foreign) = output.ids().find(|id| !known.contains(id)) {
        return Err(Error::integrity(format!(
            "stage {stage:?} produced sample {foreign:?} that was not in its input"
        )));
    }
    let mut log = input.stage_log.clone();
    log.push(StageRecord::new(stage, input.len(), output.len()));
    Ok(Corpus {
        samples: output.samples,
        stage_log: log,
    })
}
