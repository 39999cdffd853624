#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veriforge::dedup::{cosine_similarity, EmbeddingProvider, NgramHashEmbedder};
use veriforge::{Corpus, Sample, StageRecord};

pub const BIN: &str = env!("CARGO_BIN_EXE_veriforge");

pub fn ident(rng: &mut ChaCha8Rng, len: usize) -> String {
    let mut s = String::with_capacity(len);
    s.push(rng.random_range(b'a'..=b'z') as char);
    while s.len() < len {
        let c = rng.random_range(0..36u8);
        s.push(if c < 26 {
            (b'a' + c) as char
        } else {
            (b'0' + c - 26) as char
        });
    }
    s
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| {
            let len = rng.random_range(4..10);
            ident(rng, len)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A module of random register-transfer statements over long random names.
pub fn random_module(rng: &mut ChaCha8Rng) -> String {
    let name = format!("m_{}", ident(rng, 12));
    let a = ident(rng, 12);
    let b = ident(rng, 12);
    let y = ident(rng, 12);
    let regs: Vec<String> = (0..4).map(|_| ident(rng, 12)).collect();
    let mut body = format!("module {name}(input clk, input [7:0] {a}, input [7:0] {b}, output reg [7:0] {y});\n");
    for r in &regs {
        body.push_str(&format!("  reg [7:0] {r};\n"));
    }
    body.push_str("  always @(posedge clk) begin\n");
    for (i, r) in regs.iter().enumerate() {
        let src = if i == 0 { &a } else { &regs[i - 1] };
        let k: u8 = rng.random();
        body.push_str(&format!("    {r} <= {src} ^ {b} + 8'h{k:02x};\n"));
    }
    body.push_str(&format!("    {y} <= {};\n  end\nendmodule\n", regs[3]));
    body
}

fn unique(rng: &mut ChaCha8Rng, id: String) -> Sample {
    let problem = format!("Design a register block. {}", words(rng, 30));
    let tb = "module tb;\n  initial $finish;\nendmodule\n";
    Sample::new(id, problem, random_module(rng)).with_testbench(tb)
}

fn variant(base: &Sample, id: String, j: usize) -> Sample {
    let mut s = base.clone();
    s.id = id;
    s.problem = format!("{} Variant {j}.", base.problem);
    s.solution = format!("// revision {j}\n{}", base.solution);
    s
}

/// `uniques` unrelated samples followed by `clusters` groups of `size`
/// near-duplicates. Returns the corpus and the planted groups.
pub fn planted_corpus(seed: u64, uniques: usize, clusters: usize, size: usize) -> (Corpus, Vec<Vec<String>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<Sample> = (0..uniques).map(|i| unique(&mut rng, format!("u{i:03}"))).collect();
    let mut groups = Vec::new();
    for c in 0..clusters {
        let base = unique(&mut rng, String::new());
        let ids: Vec<String> = (0..size).map(|j| format!("c{c:02}_{j}")).collect();
        samples.extend(ids.iter().enumerate().map(|(j, id)| variant(&base, id.clone(), j)));
        groups.push(ids);
    }
    let n = samples.len();
    (
        Corpus::with_log(samples, vec![StageRecord::new("ingest", n, n)]).unwrap(),
        groups,
    )
}

/// Pairwise similarity under the default embedder, taking the larger of the
/// solution and prompt similarities.
pub fn pair_similarity(a: &Sample, b: &Sample) -> f64 {
    let e = NgramHashEmbedder::default();
    let code = cosine_similarity(&e.embed(&a.solution).unwrap(), &e.embed(&b.solution).unwrap()).unwrap();
    let desc = cosine_similarity(&e.embed(&a.prompt_text()).unwrap(), &e.embed(&b.prompt_text()).unwrap()).unwrap();
    code.max(desc)
}

/// Checks that planted groups are cliques at `threshold` and that no other
/// pair reaches it. Returns (min within-group, max across-group).
pub fn check_separation(corpus: &Corpus, groups: &[Vec<String>], threshold: f64) -> (f64, f64) {
    let group_of = |id: &str| groups.iter().position(|g| g.iter().any(|x| x == id));
    let s = corpus.samples();
    let (mut lo, mut hi) = (1.0f64, 0.0f64);
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let sim = pair_similarity(&s[i], &s[j]);
            match (group_of(&s[i].id), group_of(&s[j].id)) {
                (Some(a), Some(b)) if a == b => lo = lo.min(sim),
                _ => hi = hi.max(sim),
            }
        }
    }
    assert!(lo >= threshold, "planted pair below threshold: {lo}");
    assert!(hi < threshold, "unplanted pair at or above threshold: {hi}");
    (lo, hi)
}

/// Fifty samples for the full pipeline: 30 uniques, 4 clusters of 3
/// near-duplicates, 4 that fail to compile, 2 that break the naming rule
/// and 2 whose simulation fails under the mock backend.
pub fn toy_corpus() -> Corpus {
    let (base, _) = planted_corpus(7, 30, 4, 3);
    let mut samples = base.into_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..4 {
        let mut s = unique(&mut rng, format!("broken{i}"));
        s.solution = s.solution.replace("endmodule\n", "");
        samples.push(s);
    }
    for i in 0..2 {
        let mut s = unique(&mut rng, format!("style{i}"));
        s.solution = s.solution.replacen("module m_", "module BadName_", 1);
        samples.push(s);
    }
    for i in 0..2 {
        let s = unique(&mut rng, format!("simfail{i}"));
        samples.push(s.with_testbench("module tb;\n  // mock: fail\nendmodule\n"));
    }
    assert_eq!(samples.len(), 50);
    Corpus::new(samples).unwrap()
}

pub fn write_corpus(path: &std::path::Path, c: &Corpus) {
    veriforge::save_corpus(c, path).unwrap();
}
