//! Downstream topic model: TF-IDF features and one-vs-rest logistic
//! regression over closure labels, with hierarchy-consistent prediction.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{label_closure, LabeledCorpus};
use crate::error::{Error, Result};
use crate::taxonomy::{Taxonomy, TaxonomyError};
use crate::util;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("vocabulary is empty after min_df={0} filtering")]
    EmptyVocabulary(u32),
    #[error("no class has a positive training example")]
    NoTrainableClass,
    #[error("unsupported model format version {0}")]
    FormatVersion(u32),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Lowercases, splits on non-alphanumerics and drops tokens shorter than 2 chars.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Tokens in column order (lexicographic).
    pub tokens: Vec<String>,
    pub df: Vec<u32>,
    pub idf: Vec<f64>,
    pub n_docs: u32,
    #[serde(skip)]
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    fn build_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn column(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }
}

/// Smoothed idf: ln((1 + N) / (1 + df)) + 1.
pub fn idf(n_docs: u32, df: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Fits the vocabulary on proposal abstracts.
pub fn fit_vectorizer(train: &LabeledCorpus, min_df: u32) -> Result<Vocabulary, ClassifierError> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for p in train.proposals() {
        let unique: BTreeSet<String> = tokenize(&p.abstract_text).into_iter().collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let n_docs = train.len() as u32;
    let kept: Vec<(String, u32)> = df.into_iter().filter(|(_, d)| *d >= min_df).collect();
    if kept.is_empty() {
        return Err(ClassifierError::EmptyVocabulary(min_df));
    }
    let mut vocab = Vocabulary {
        idf: kept.iter().map(|(_, d)| idf(n_docs, *d)).collect(),
        df: kept.iter().map(|(_, d)| *d).collect(),
        tokens: kept.into_iter().map(|(t, _)| t).collect(),
        n_docs,
        index: BTreeMap::new(),
    };
    vocab.build_index();
    Ok(vocab)
}

/// Sparse, L2-normalized TF-IDF vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i as usize]).sum()
    }
}

pub fn transform(vocab: &Vocabulary, text: &str) -> FeatureVector {
    let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
    for token in tokenize(text) {
        if let Some(col) = vocab.column(&token) {
            *tf.entry(col).or_default() += 1.0;
        }
    }
    let mut entries: Vec<(u32, f64)> = tf
        .into_iter()
        .map(|(col, count)| (col, count * vocab.idf[col as usize]))
        .collect();
    let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut entries {
            *w /= norm;
        }
    }
    FeatureVector { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: u32,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
    pub min_df: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 0.5,
            l2: 1e-4,
            seed: 0,
            min_df: 2,
        }
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub code: String,
    pub parent: Option<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub positives: u32,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModel {
    pub format_version: u32,
    pub config: TrainConfig,
    pub vocabulary: Vocabulary,
    /// Sorted by code.
    pub classes: Vec<ClassWeights>,
    /// Classes present in the taxonomy but without any training positive.
    pub skipped: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z), overflow-safe.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Value and gradient of one binary problem:
/// mean logistic loss + (l2 / 2)·‖w‖². The bias is not regularized.
pub fn objective(rows: &[FeatureVector], targets: &[f64], weights: &[f64], bias: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_bias = 0.0;
    let mut loss = 0.0;
    for (x, &y) in rows.iter().zip(targets) {
        let z = x.dot(weights) + bias;
        // -[y log σ(z) + (1-y) log(1-σ(z))] = softplus(z) - y z
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for &(i, v) in &x.entries {
            grad[i as usize] += residual * v;
        }
        grad_bias += residual;
    }
    let mut sq = 0.0;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        sq += w * w;
    }
    (loss / n + 0.5 * l2 * sq, grad, grad_bias / n)
}

/// Full-batch gradient descent from zero weights. Returns weights, bias and
/// the loss before each update plus the final loss.
pub fn fit_binary(rows: &[FeatureVector], targets: &[f64], dim: usize, cfg: &TrainConfig) -> (Vec<f64>, f64, Vec<f64>) {
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut history = Vec::with_capacity(cfg.epochs as usize + 1);
    for _ in 0..cfg.epochs {
        let (loss, gw, gb) = objective(rows, targets, &w, b, cfg.l2);
        history.push(loss);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= cfg.lr * gi;
        }
        b -= cfg.lr * gb;
    }
    history.push(objective(rows, targets, &w, b, cfg.l2).0);
    (w, b, history)
}

/// Trains one classifier per taxonomy node that has at least one closure positive.
pub fn train(
    train: &LabeledCorpus,
    taxonomy: &Taxonomy,
    cfg: &TrainConfig,
) -> Result<HierarchicalModel, ClassifierError> {
    let vocabulary = fit_vectorizer(train, cfg.min_df)?;
    let rows: Vec<FeatureVector> = train
        .proposals()
        .iter()
        .map(|p| transform(&vocabulary, &p.abstract_text))
        .collect();
    let closures: Vec<BTreeSet<String>> = train
        .proposals()
        .iter()
        .map(|p| label_closure(p, taxonomy))
        .collect::<Result<_, _>>()?;

    let mut trainable = Vec::new();
    let mut skipped = Vec::new();
    for code in taxonomy.codes() {
        if closures.iter().any(|c| c.contains(code)) {
            trainable.push(code);
        } else {
            skipped.push(code.to_owned());
        }
    }
    if trainable.is_empty() {
        return Err(ClassifierError::NoTrainableClass);
    }

    let classes: Vec<ClassWeights> = trainable
        .par_iter()
        .map(|&code| {
            let targets: Vec<f64> = closures
                .iter()
                .map(|c| if c.contains(code) { 1.0 } else { 0.0 })
                .collect();
            let (weights, bias, history) = fit_binary(&rows, &targets, vocabulary.len(), cfg);
            ClassWeights {
                code: code.to_owned(),
                parent: taxonomy.parent(code).expect("known code").map(str::to_owned),
                weights,
                bias,
                positives: targets.iter().filter(|&&t| t > 0.0).count() as u32,
                final_loss: *history.last().expect("non-empty history"),
            }
        })
        .collect();

    Ok(HierarchicalModel {
        format_version: MODEL_FORMAT_VERSION,
        config: *cfg,
        vocabulary,
        classes,
        skipped,
    })
}

impl HierarchicalModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        util::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut model: HierarchicalModel = util::read_json(path)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::FormatVersion(model.format_version).into());
        }
        model.vocabulary.build_index();
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: HierarchicalModel = serde_json::from_str(text).map_err(|e| Error::json("model", e))?;
        model.vocabulary.build_index();
        Ok(model)
    }

    pub fn class_codes(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.code.as_str())
    }

    /// Sigmoid score per class.
    pub fn scores(&self, text: &str) -> BTreeMap<String, f64> {
        let x = transform(&self.vocabulary, text);
        self.classes
            .iter()
            .map(|c| (c.code.clone(), sigmoid(x.dot(&c.weights) + c.bias)))
            .collect()
    }

    fn parent_of(&self, code: &str) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| c.code == code)
            .and_then(|c| c.parent.as_deref())
    }

    /// Adds every ancestor known to the model.
    pub fn close(&self, codes: &BTreeSet<String>) -> BTreeSet<String> {
        let mut out = codes.clone();
        for code in codes {
            let mut cursor = self.parent_of(code);
            while let Some(p) = cursor {
                if !out.insert(p.to_owned()) {
                    break;
                }
                cursor = self.parent_of(p);
            }
        }
        out
    }

    /// Classes scoring at least `threshold`, closed upward. An empty raw set
    /// falls back to the best-scoring leaf.
    pub fn predict(&self, text: &str, threshold: f64) -> BTreeSet<String> {
        let scores = self.scores(text);
        let mut raw: BTreeSet<String> = scores
            .iter()
            .filter(|(_, &s)| s >= threshold)
            .map(|(c, _)| c.clone())
            .collect();
        if raw.is_empty() {
            let parents: BTreeSet<&str> = self.classes.iter().filter_map(|c| c.parent.as_deref()).collect();
            let best = scores.iter().filter(|(c, _)| !parents.contains(c.as_str())).fold(
                None::<(&String, f64)>,
                |best, (c, &s)| match best {
                    Some((_, bs)) if bs >= s => best,
                    _ => Some((c, s)),
                },
            );
            if let Some((code, _)) = best {
                raw.insert(code.clone());
            }
        }
        self.close(&raw)
    }
}
