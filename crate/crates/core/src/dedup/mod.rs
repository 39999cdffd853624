//! Redundancy elimination: pairwise similarity over code and descriptions,
//! maximal-clique grouping, and one kept representative per group.
//!
//! Graphs are built per domain label; samples in different domains are
//! never compared.

mod cliques;
mod embed;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

pub use cliques::{bron_kerbosch_maximal_cliques, Combine, SimilarityGraph};
pub use embed::{cosine_similarity, EmbedError, EmbeddingProvider, NgramHashEmbedder};

use crate::corpus::{record_stage, Corpus, Sample};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SimilarityConfig {
    pub threshold: f64,
    pub combine: Combine,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            threshold: DEFAULT_THRESHOLD,
            combine: Combine::Or,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::argument(format!(
                "similarity threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Disjoint groups covering every node, each with one kept member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueGrouping {
    pub groups: Vec<Vec<String>>,
    pub representatives: Vec<String>,
}

struct Embedded {
    code: Vec<f64>,
    desc: Vec<f64>,
}

fn embed_all(samples: &[&Sample], embedder: &dyn EmbeddingProvider) -> Result<Vec<Embedded>> {
    samples
        .par_iter()
        .map(|s| {
            let wrap = |e: EmbedError| Error::Embedding {
                id: s.id.clone(),
                message: e.to_string(),
            };
            Ok(Embedded {
                code: embedder.embed(&s.solution).map_err(wrap)?,
                desc: embedder.embed(&s.prompt_text()).map_err(wrap)?,
            })
        })
        .collect()
}

pub(crate) fn graph_for(
    samples: &[&Sample],
    embedder: &dyn EmbeddingProvider,
    config: SimilarityConfig,
) -> Result<SimilarityGraph> {
    config.validate()?;
    let vecs = embed_all(samples, embedder)?;
    let n = samples.len();

    let edges: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| -> Result<Option<(usize, usize, f64)>> {
            let code = cosine_similarity(&vecs[i].code, &vecs[j].code)?;
            let desc = cosine_similarity(&vecs[i].desc, &vecs[j].desc)?;
            let sim = match config.combine {
                Combine::Or => code.max(desc),
                Combine::And => code.min(desc),
            };
            Ok((sim >= config.threshold).then_some((i, j, sim)))
        })
        .filter_map(|r| r.transpose())
        .collect::<Result<_>>()?;

    let mut g = SimilarityGraph::new(
        samples.iter().map(|s| s.id.clone()).collect(),
        config.threshold,
        config.combine,
    );
    for (i, j, s) in edges {
        g.add_edge(i, j, s)?;
    }
    Ok(g)
}

/// Similarity graph over every sample of `corpus`. The caller is expected
/// to pass a single-domain corpus; [`deduplicate`] does the partitioning.
pub fn build_similarity_graph(
    corpus: &Corpus,
    embedder: &dyn EmbeddingProvider,
    config: SimilarityConfig,
) -> Result<SimilarityGraph> {
    let samples: Vec<&Sample> = corpus.samples().iter().collect();
    graph_for(&samples, embedder, config)
}

/// Representative preference: higher quality score, then shorter solution,
/// then smaller id. A missing score ranks below any present score.
fn prefer(a: &Sample, b: &Sample) -> Ordering {
    let qa = a.quality_score.unwrap_or(f64::NEG_INFINITY);
    let qb = b.quality_score.unwrap_or(f64::NEG_INFINITY);
    qb.total_cmp(&qa)
        .then_with(|| a.solution.len().cmp(&b.solution.len()))
        .then_with(|| a.id.cmp(&b.id))
}

fn group_samples(graph: &SimilarityGraph, lookup: &HashMap<&str, &Sample>) -> Result<CliqueGrouping> {
    for id in graph.nodes() {
        if !lookup.contains_key(id.as_str()) {
            return Err(Error::integrity(format!("graph node {id:?} is not in the corpus")));
        }
    }
    let mut assigned = vec![false; graph.node_count()];
    let mut groups = Vec::new();
    let mut representatives = Vec::new();
    for clique in cliques::maximal_cliques_idx(graph) {
        let members: Vec<usize> = clique.into_iter().filter(|&i| !assigned[i]).collect();
        if members.is_empty() {
            continue;
        }
        members.iter().for_each(|&i| assigned[i] = true);
        let ids: Vec<String> = members.iter().map(|&i| graph.nodes()[i].clone()).collect();
        let rep = ids
            .iter()
            .map(|id| lookup[id.as_str()])
            .min_by(|a, b| prefer(a, b))
            .expect("group is non-empty");
        representatives.push(rep.id.clone());
        groups.push(ids);
    }
    debug_assert!(assigned.iter().all(|&a| a));
    Ok(CliqueGrouping {
        groups,
        representatives,
    })
}

/// Greedy clique cover in canonical clique order, one representative per
/// group.
pub fn group_and_select(graph: &SimilarityGraph, corpus: &Corpus) -> Result<CliqueGrouping> {
    let lookup: HashMap<&str, &Sample> = corpus.samples().iter().map(|s| (s.id.as_str(), s)).collect();
    group_samples(graph, &lookup)
}

/// Per-domain grouping produced by a dedup run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainGrouping {
    pub domain: Option<String>,
    pub edges: usize,
    pub grouping: CliqueGrouping,
}

/// Like [`deduplicate`], also returning the groups chosen in each domain.
pub fn deduplicate_with_groups(
    corpus: &Corpus,
    embedder: &dyn EmbeddingProvider,
    config: SimilarityConfig,
) -> Result<(Corpus, Vec<DomainGrouping>)> {
    config.validate()?;
    let lookup: HashMap<&str, &Sample> = corpus.samples().iter().map(|s| (s.id.as_str(), s)).collect();
    let domains: Vec<(Option<String>, Vec<&Sample>)> = corpus.partition_by_domain().into_iter().collect();

    let per_domain: Vec<DomainGrouping> = domains
        .par_iter()
        .map(|(domain, samples)| {
            let graph = graph_for(samples, embedder, config)?;
            Ok(DomainGrouping {
                domain: domain.clone(),
                edges: graph.edge_count(),
                grouping: group_samples(&graph, &lookup)?,
            })
        })
        .collect::<Result<_>>()?;

    let keep: HashSet<&str> = per_domain
        .iter()
        .flat_map(|d| d.grouping.representatives.iter().map(String::as_str))
        .collect();
    let out = corpus.retain_by(|s| keep.contains(s.id.as_str()));
    Ok((record_stage(corpus, "dedup", out)?, per_domain))
}

/// Keeps one representative per similarity group, in original order.
pub fn deduplicate(corpus: &Corpus, embedder: &dyn EmbeddingProvider, config: SimilarityConfig) -> Result<Corpus> {
    deduplicate_with_groups(corpus, embedder, config).map(|(c, _)| c)
}
