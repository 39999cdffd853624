//! Similarity graph and maximal-clique enumeration.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How code and description similarities combine into one edge decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    /// Edge if either modality reaches the threshold.
    #[default]
    Or,
    /// Edge only if both do.
    And,
}

impl std::str::FromStr for Combine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Combine::Or),
            "and" => Ok(Combine::And),
            other => Err(Error::argument(format!("unknown combiner {other:?} (expected or|and)"))),
        }
    }
}

/// Undirected graph over sample ids. Node indices follow insertion order;
/// edges are stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    nodes: Vec<String>,
    edges: BTreeMap<(usize, usize), f64>,
    adjacency: Vec<Vec<usize>>,
    pub threshold: f64,
    pub combine: Combine,
}

impl SimilarityGraph {
    pub fn new(nodes: Vec<String>, threshold: f64, combine: Combine) -> Self {
        let n = nodes.len();
        SimilarityGraph {
            nodes,
            edges: BTreeMap::new(),
            adjacency: vec![Vec::new(); n],
            threshold,
            combine,
        }
    }

    /// Builds a graph directly from id pairs, mainly for tests and tooling.
    pub fn from_edges(nodes: &[&str], edges: &[(&str, &str)]) -> Result<Self> {
        let mut g = SimilarityGraph::new(nodes.iter().map(|s| s.to_string()).collect(), 0.8, Combine::Or);
        let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        for (a, b) in edges {
            let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) else {
                return Err(Error::argument(format!("edge ({a}, {b}) names an unknown node")));
            };
            g.add_edge(i, j, 1.0)?;
        }
        Ok(g)
    }

    pub(crate) fn add_edge(&mut self, i: usize, j: usize, similarity: f64) -> Result<()> {
        if i == j {
            return Err(Error::argument("self-edges are not allowed"));
        }
        let key = (i.min(j), i.max(j));
        if self.edges.insert(key, similarity).is_none() {
            self.adjacency[i].push(j);
            self.adjacency[j].push(i);
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(id, id, similarity)` with ids in node order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.edges
            .iter()
            .map(|(&(i, j), &s)| (self.nodes[i].as_str(), self.nodes[j].as_str(), s))
    }

    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.nodes.iter().position(|n| n == a)?;
        let j = self.nodes.iter().position(|n| n == b)?;
        self.edges.get(&(i.min(j), i.max(j))).copied()
    }

    pub(crate) fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }
}

/// Fixed-width bitset over node indices.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn full(n: usize) -> Self {
        let mut b = Bits::empty(n);
        for i in 0..n {
            b.set(i);
        }
        b
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn and_not(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }
    fn count_and(&self, other: &Bits) -> u32 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones()).sum()
    }
    fn or(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a | b).collect())
    }
    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let t = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + t)
            })
        })
    }
}

/// Maximal cliques as sorted index lists, in canonical order.
///
/// Bron–Kerbosch with Tomita pivoting: the pivot is the vertex of `P ∪ X`
/// with the most neighbours in `P`, and only `P \ N(pivot)` is branched on.
pub(crate) fn maximal_cliques_idx(graph: &SimilarityGraph) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    let adj: Vec<Bits> = (0..n)
        .map(|i| {
            let mut b = Bits::empty(n);
            graph.neighbors(i).iter().for_each(|&j| b.set(j));
            b
        })
        .collect();

    let mut out = Vec::new();
    let mut r = Vec::new();
    expand(&adj, &mut r, Bits::full(n), Bits::empty(n), &mut out);

    for c in out.iter_mut() {
        c.sort_by(|&a, &b| graph.nodes[a].cmp(&graph.nodes[b]));
    }
    out.sort_by(|a, b| canonical_order(graph, a, b));
    out
}

fn expand(adj: &[Bits], r: &mut Vec<usize>, mut p: Bits, mut x: Bits, out: &mut Vec<Vec<usize>>) {
    if p.is_empty() {
        if x.is_empty() && !r.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    let pivot = p
        .or(&x)
        .iter()
        .max_by_key(|&u| (p.count_and(&adj[u]), std::cmp::Reverse(u)))
        .expect("P is non-empty");
    let candidates: Vec<usize> = p.and_not(&adj[pivot]).iter().collect();
    for v in candidates {
        r.push(v);
        expand(adj, r, p.and(&adj[v]), x.and(&adj[v]), out);
        r.pop();
        p.clear(v);
        x.set(v);
    }
}

fn canonical_order(graph: &SimilarityGraph, a: &[usize], b: &[usize]) -> Ordering {
    b.len().cmp(&a.len()).then_with(|| {
        let ia = a.iter().map(|&i| &graph.nodes[i]);
        let ib = b.iter().map(|&i| &graph.nodes[i]);
        ia.cmp(ib)
    })
}

/// All maximal cliques as sorted id lists. Ordered by descending size, then
/// by smallest member (ties continue lexicographically over the members).
pub fn bron_kerbosch_maximal_cliques(graph: &SimilarityGraph) -> Vec<Vec<String>> {
    maximal_cliques_idx(graph)
        .into_iter()
        .map(|c| c.into_iter().map(|i| graph.nodes[i].clone()).collect())
        .collect()
}
