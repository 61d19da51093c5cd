//! Labeled proposal corpora: ingestion, label closure, per-class counting,
//! appending generated proposals and stratified splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::taxonomy::{Taxonomy, TaxonomyError};
use crate::util;

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("proposal {id} has unknown label {code}")]
    UnknownLabel { id: String, code: String },
    #[error("duplicate proposal id {0}")]
    DuplicateId(String),
    #[error("proposal {0} has an empty label set")]
    EmptyLabels(String),
    #[error("proposal {0}: provenance must be present exactly when source = generated")]
    Provenance(String),
    #[error("generated proposal id {0} collides with an existing proposal")]
    IdCollision(String),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    DegenerateFraction(f64),
    #[error("cannot split a corpus of {0} proposals")]
    TooSmall(usize),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Original,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt_hash: String,
    pub model: String,
    pub seed: u64,
    /// Sampling temperature, when the backend has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Proposal {
    pub fn original(
        id: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Proposal {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            keywords: Vec::new(),
            labels: labels.into_iter().map(Into::into).collect(),
            source: Source::Original,
            provenance: None,
        }
    }

    pub fn is_generated(&self) -> bool {
        self.source == Source::Generated
    }

    /// Checks the record-level invariants, and labels against `taxonomy` when given.
    pub fn validate(&self, taxonomy: Option<&Taxonomy>) -> Result<(), CorpusError> {
        if self.labels.is_empty() {
            return Err(CorpusError::EmptyLabels(self.id.clone()));
        }
        if self.provenance.is_some() != self.is_generated() {
            return Err(CorpusError::Provenance(self.id.clone()));
        }
        if let Some(t) = taxonomy {
            if let Some(code) = self.labels.iter().find(|c| !t.contains(c)) {
                return Err(CorpusError::UnknownLabel {
                    id: self.id.clone(),
                    code: code.clone(),
                });
            }
        }
        Ok(())
    }

    /// Dedupe key: SHA-256 of the lowercased, whitespace-collapsed abstract.
    pub fn dedupe_key(&self) -> String {
        let normalized = self
            .abstract_text
            .split_whitespace()
            .map(str::to_lowercase)
            .collect::<Vec<_>>()
            .join(" ");
        util::sha256_hex(normalized)
    }
}

/// Raw labels unioned with every ancestor.
pub fn label_closure(p: &Proposal, taxonomy: &Taxonomy) -> Result<BTreeSet<String>, TaxonomyError> {
    taxonomy.closure(&p.labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingMode {
    Direct,
    #[default]
    Closure,
}

impl std::str::FromStr for CountingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(CountingMode::Direct),
            "closure" => Ok(CountingMode::Closure),
            other => Err(format!("unknown counting mode `{other}` (expected closure|direct)")),
        }
    }
}

impl std::fmt::Display for CountingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CountingMode::Direct => "direct",
            CountingMode::Closure => "closure",
        })
    }
}

/// Per-class proposal counts n_c for every taxonomy node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub counts: BTreeMap<String, u64>,
    pub mode: CountingMode,
}

impl ClassCounts {
    pub fn get(&self, code: &str) -> u64 {
        self.counts.get(code).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Outcome of [`LabeledCorpus::append_generated`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AppendStats {
    pub appended: u64,
    pub dropped: u64,
}

/// The proposal set with its labels. Immutable; operations return new corpora.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledCorpus {
    proposals: Vec<Proposal>,
    index: HashMap<String, usize>,
}

impl LabeledCorpus {
    pub fn new(proposals: Vec<Proposal>, taxonomy: Option<&Taxonomy>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(proposals.len());
        for (i, p) in proposals.iter().enumerate() {
            p.validate(taxonomy)?;
            if index.insert(p.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(LabeledCorpus { proposals, index })
    }

    pub fn from_reader(reader: impl BufRead, taxonomy: &Taxonomy) -> Result<Self> {
        let records: Vec<Proposal> = util::read_jsonl(reader, "corpus")?;
        Ok(Self::new(records, Some(taxonomy))?)
    }

    pub fn load(path: &Path, taxonomy: &Taxonomy) -> Result<Self> {
        let reader = util::open(path)?;
        Self::from_reader(reader, taxonomy).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_jsonl(path, &self.proposals)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.proposals {
            out.push_str(&serde_json::to_string(p).expect("proposal serializes"));
            out.push('\n');
        }
        out
    }

    pub fn proposals(&self) -> &[Proposal] {
        &self.proposals
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Proposal> {
        self.index.get(id).map(|&i| &self.proposals[i])
    }

    pub fn originals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.iter().filter(|p| !p.is_generated())
    }

    pub fn generated_count(&self) -> usize {
        self.proposals.iter().filter(|p| p.is_generated()).count()
    }

    /// n_c for every taxonomy node; nodes without proposals count 0.
    pub fn count_per_class(&self, taxonomy: &Taxonomy, mode: CountingMode) -> Result<ClassCounts, CorpusError> {
        let mut counts: BTreeMap<String, u64> = taxonomy.codes().map(|c| (c.to_owned(), 0)).collect();
        for p in &self.proposals {
            let labels = match mode {
                CountingMode::Direct => p.labels.clone(),
                CountingMode::Closure => label_closure(p, taxonomy)?,
            };
            for code in labels {
                match counts.get_mut(&code) {
                    Some(n) => *n += 1,
                    None => return Err(CorpusError::UnknownLabel { id: p.id.clone(), code }),
                }
            }
        }
        Ok(ClassCounts { counts, mode })
    }

    /// Appends generated proposals after the originals, dropping any whose
    /// normalized abstract is already present (in the corpus or earlier in `generated`).
    pub fn append_generated(&self, generated: Vec<Proposal>) -> Result<(LabeledCorpus, AppendStats), CorpusError> {
        let mut seen: HashSet<String> = self.proposals.iter().map(Proposal::dedupe_key).collect();
        let mut ids: HashSet<&str> = self.index.keys().map(String::as_str).collect();
        let mut stats = AppendStats::default();
        let mut fresh = Vec::new();
        for p in &generated {
            if !p.is_generated() || p.provenance.is_none() {
                return Err(CorpusError::Provenance(p.id.clone()));
            }
            p.validate(None)?;
            if !seen.insert(p.dedupe_key()) {
                stats.dropped += 1;
                continue;
            }
            if !ids.insert(p.id.as_str()) {
                return Err(CorpusError::IdCollision(p.id.clone()));
            }
            fresh.push(p.clone());
            stats.appended += 1;
        }
        let mut proposals = self.proposals.clone();
        proposals.extend(fresh);
        Ok((LabeledCorpus::new(proposals, None)?, stats))
    }

    /// Seeded split into (train, test).
    ///
    /// Proposals are stratified by their raw label set. A stratum with a single
    /// original member sends it to train; generated proposals always go to train.
    /// Both halves keep corpus order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(LabeledCorpus, LabeledCorpus), CorpusError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(CorpusError::DegenerateFraction(test_fraction));
        }
        if self.proposals.len() < 2 {
            return Err(CorpusError::TooSmall(self.proposals.len()));
        }
        let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, p) in self.proposals.iter().enumerate() {
            if !p.is_generated() {
                let key = p.labels.iter().cloned().collect::<Vec<_>>().join("|");
                strata.entry(key).or_default().push(i);
            }
        }
        let mut in_test = vec![false; self.proposals.len()];
        for (key, mut members) in strata {
            if members.len() < 2 {
                continue;
            }
            let n_test = ((test_fraction * members.len() as f64).round() as usize).min(members.len() - 1);
            let mut rng = ChaCha8Rng::seed_from_u64(util::derive_seed(seed, &["split", &key]));
            members.shuffle(&mut rng);
            for &i in &members[..n_test] {
                in_test[i] = true;
            }
        }
        let (test, train): (Vec<_>, Vec<_>) = self.proposals.iter().cloned().zip(in_test).partition(|(_, t)| *t);
        let strip = |v: Vec<(Proposal, bool)>| v.into_iter().map(|(p, _)| p).collect::<Vec<_>>();
        Ok((
            LabeledCorpus::new(strip(train), None)?,
            LabeledCorpus::new(strip(test), None)?,
        ))
    }
}
