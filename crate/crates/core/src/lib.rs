//! Curation, verification and evaluation tooling for Verilog code datasets.

pub mod adaptive;
pub mod corpus;
pub mod dedup;
pub mod error;
pub mod evalkit;
pub mod generation;
pub mod http;
pub mod parallel;
pub mod pipeline;
pub mod quality;
pub mod reference;
pub mod taxonomy;
pub mod verify;

pub use corpus::{load_corpus, record_stage, save_corpus, Corpus, Sample, StageRecord};
pub use error::{Error, Result};
