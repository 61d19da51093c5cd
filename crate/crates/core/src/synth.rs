//! Seeded synthetic corpora with controllable class imbalance.
//!
//! Builds a two-level taxonomy (roots with a fixed number of leaves each) over
//! a pseudo-word vocabulary. Each document mixes a Zipfian background
//! distribution with the topical words of its root and of its leaf, so
//! siblings share vocabulary but leaves stay separable.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, Proposal};
use crate::error::{Error, Result};
use crate::promptgen::KeywordTable;
use crate::taxonomy::{DisciplineNode, Taxonomy};
use crate::util;

/// The imbalance profile used throughout the docs and acceptance tests.
pub const REFERENCE_PROFILE: [u32; 6] = [200, 200, 200, 200, 10, 10];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthProfile {
    pub docs_per_leaf: Vec<u32>,
    pub leaves_per_root: usize,
    pub vocab_size: usize,
    pub topic_words: usize,
    pub min_len: u32,
    pub max_len: u32,
    pub seed: u64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            docs_per_leaf: REFERENCE_PROFILE.to_vec(),
            leaves_per_root: 3,
            vocab_size: 2000,
            topic_words: 40,
            min_len: 120,
            max_len: 200,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub taxonomy: Taxonomy,
    pub corpus: LabeledCorpus,
    pub keywords: KeywordTable,
}

impl SynthCorpus {
    /// Writes `taxonomy.jsonl`, `corpus.jsonl` and `keywords.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.taxonomy.save(&dir.join("taxonomy.jsonl"))?;
        self.corpus.save(&dir.join("corpus.jsonl"))?;
        util::write_json(&dir.join("keywords.json"), &self.keywords)
    }
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "th",
];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "y"];

fn pseudo_words(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=4);
        let word: String = (0..syllables)
            .map(|_| {
                format!(
                    "{}{}",
                    ONSETS[rng.random_range(0..ONSETS.len())],
                    VOWELS[rng.random_range(0..VOWELS.len())]
                )
            })
            .collect();
        if seen.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

fn zipf(n: usize) -> Vec<f64> {
    (0..n).map(|r| 1.0 / (r as f64 + 1.0)).collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Generates taxonomy, corpus and keyword table for `profile`.
pub fn synth_corpus(profile: &SynthProfile) -> Result<SynthCorpus> {
    if profile.docs_per_leaf.is_empty() || profile.docs_per_leaf.iter().all(|&n| n == 0) {
        return Err(Error::Config(
            "profile must list at least one non-zero leaf count".into(),
        ));
    }
    if profile.leaves_per_root == 0 || profile.min_len == 0 || profile.max_len < profile.min_len {
        return Err(Error::Config("degenerate synthetic profile".into()));
    }
    let n_leaves = profile.docs_per_leaf.len();
    let n_roots = n_leaves.div_ceil(profile.leaves_per_root);
    if n_roots > 26 {
        return Err(Error::Config("at most 26 root disciplines are supported".into()));
    }
    let topical = (n_roots + n_leaves) * profile.topic_words;
    if profile.vocab_size < topical + profile.topic_words {
        return Err(Error::Config(format!(
            "vocab_size {} too small for {} topical words plus background",
            profile.vocab_size, topical
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(util::derive_seed(profile.seed, &["synth"]));
    let vocab = pseudo_words(profile.vocab_size, &mut rng);
    let (topic_pool, background) = vocab.split_at(topical);
    let mut blocks = topic_pool.chunks(profile.topic_words);
    let root_words: Vec<&[String]> = (0..n_roots).map(|_| blocks.next().expect("sized")).collect();
    let leaf_words: Vec<&[String]> = (0..n_leaves).map(|_| blocks.next().expect("sized")).collect();

    let mut nodes = Vec::new();
    let mut leaf_codes = Vec::new();
    for (r, words) in root_words.iter().enumerate() {
        let code = ((b'A' + r as u8) as char).to_string();
        let name = format!("{} Sciences", capitalize(&words[0]));
        nodes.push(DisciplineNode::new(code, name, None));
    }
    for (l, words) in leaf_words.iter().enumerate() {
        let root = ((b'A' + (l / profile.leaves_per_root) as u8) as char).to_string();
        let code = format!("{root}{:02}", l % profile.leaves_per_root + 1);
        let name = format!("{} {}", capitalize(&words[0]), capitalize(&words[1]));
        nodes.push(DisciplineNode::new(code.clone(), name, Some(&root)));
        leaf_codes.push(code);
    }
    let taxonomy = Taxonomy::from_nodes(nodes)?;

    let bg_dist = WeightedIndex::new(zipf(background.len())).expect("non-empty");
    let topic_dist = WeightedIndex::new(zipf(profile.topic_words)).expect("non-empty");
    // background / root topic / leaf topic
    let source_dist = WeightedIndex::new([0.6, 0.15, 0.25]).expect("valid");

    let mut proposals = Vec::new();
    for (l, &count) in profile.docs_per_leaf.iter().enumerate() {
        let root = &root_words[l / profile.leaves_per_root];
        let leaf = &leaf_words[l];
        let draw = |rng: &mut ChaCha8Rng| -> String {
            match source_dist.sample(rng) {
                0 => background[bg_dist.sample(rng)].clone(),
                1 => root[topic_dist.sample(rng)].clone(),
                _ => leaf[topic_dist.sample(rng)].clone(),
            }
        };
        for _ in 0..count {
            let len = rng.random_range(profile.min_len..=profile.max_len) as usize;
            let words: Vec<String> = (0..len).map(|_| draw(&mut rng)).collect();
            let body = words
                .chunks(14)
                .map(|s| format!("{}.", capitalize(&s.join(" "))))
                .collect::<Vec<_>>()
                .join(" ");
            let title = (0..6)
                .map(|_| capitalize(&draw(&mut rng)))
                .collect::<Vec<_>>()
                .join(" ");
            let mut kw: Vec<String> = leaf[..10].choose_multiple(&mut rng, 3).cloned().collect();
            kw.sort();
            proposals.push(Proposal {
                keywords: kw,
                ..Proposal::original(String::new(), title, body, [leaf_codes[l].clone()])
            });
        }
    }
    proposals.shuffle(&mut rng);
    for (i, p) in proposals.iter_mut().enumerate() {
        p.id = format!("p{i:05}");
    }
    let corpus = LabeledCorpus::new(proposals, Some(&taxonomy))?;

    let keywords = KeywordTable(
        leaf_codes
            .iter()
            .zip(&leaf_words)
            .map(|(code, words)| (code.clone(), words[..8].to_vec()))
            .collect::<BTreeMap<_, _>>(),
    );
    Ok(SynthCorpus {
        taxonomy,
        corpus,
        keywords,
    })
}
