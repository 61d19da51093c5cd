//! Minority scores and generation budget allocation over the discipline hierarchy.
//!
//! Each participating class `c` with proposal count `n_c` receives the score
//!
//! ```text
//! s_c = exp(-n_c / λ) / Σ_i exp(-n_i / λ)
//! ```
//!
//! and an integer share `f_c` of the total budget `T`, obtained by
//! largest-remainder rounding of `T · s_c` so that `Σ f_c = T` exactly.
//!
//! Smaller `λ` concentrates the budget on the least-populated class; larger
//! `λ` flattens it towards uniform.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassCounts, CorpusError, CountingMode, LabeledCorpus};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("no participating classes")]
    NoClasses,
    #[error("lambda must be a positive finite number, got {0}")]
    InvalidLambda(f64),
    #[error("scores must sum to 1 (got {0})")]
    UnnormalizedScores(f64),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("class filter names unknown discipline {0}")]
    UnknownClass(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// The focal-point temperature: a fixed value or the mean participating count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Lambda {
    #[default]
    Auto,
    #[serde(untagged)]
    Fixed(f64),
}

impl std::str::FromStr for Lambda {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Lambda::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("lambda must be a number or `auto`, got `{s}`"))?;
        if v > 0.0 && v.is_finite() {
            Ok(Lambda::Fixed(v))
        } else {
            Err(format!("lambda must be positive, got {v}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    lambda: Lambda,
    total_budget: u64,
    #[serde(default)]
    mode: CountingMode,
    #[serde(default)]
    class_filter: Option<BTreeSet<String>>,
}

impl SamplerConfig {
    pub fn new(lambda: Lambda, total_budget: u64) -> Result<Self, SamplerError> {
        if let Lambda::Fixed(v) = lambda {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SamplerError::InvalidLambda(v));
            }
        }
        if total_budget == 0 {
            return Err(SamplerError::InvalidConfig("total budget must be at least 1".into()));
        }
        Ok(SamplerConfig {
            lambda,
            total_budget,
            mode: CountingMode::default(),
            class_filter: None,
        })
    }

    pub fn with_mode(mut self, mode: CountingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_classes(mut self, classes: BTreeSet<String>) -> Self {
        self.class_filter = Some(classes);
        self
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn total_budget(&self) -> u64 {
        self.total_budget
    }

    pub fn mode(&self) -> CountingMode {
        self.mode
    }

    pub fn class_filter(&self) -> Option<&BTreeSet<String>> {
        self.class_filter.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub code: String,
    pub n: u64,
    pub score: f64,
    pub alloc: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorityPlan {
    pub lambda: f64,
    pub total: u64,
    pub mode: CountingMode,
    pub rows: Vec<PlanRow>,
}

impl MinorityPlan {
    pub fn alloc(&self, code: &str) -> Option<u64> {
        self.rows.iter().find(|r| r.code == code).map(|r| r.alloc)
    }

    pub fn allocated(&self) -> u64 {
        self.rows.iter().map(|r| r.alloc).sum()
    }
}

/// Softmax of `-n_c / λ` over the given classes, summed in code order.
///
/// Exponents are shifted by the minimum count (the maximum exponent), and the
/// shift is done in integers so huge counts keep full precision.
pub fn minority_scores(counts: &BTreeMap<String, u64>, lambda: f64) -> Result<BTreeMap<String, f64>, SamplerError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SamplerError::InvalidLambda(lambda));
    }
    let n_min = *counts.values().min().ok_or(SamplerError::NoClasses)?;
    let weights: Vec<f64> = counts
        .values()
        .map(|&n| (-((n - n_min) as f64) / lambda).exp())
        .collect();
    let norm = neumaier_sum(&weights);
    Ok(counts
        .keys()
        .zip(weights)
        .map(|(code, w)| (code.clone(), w / norm))
        .collect())
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Integer budget per class by largest remainder of `total · s_c`.
///
/// Remainder units go to the largest fractional parts; ties prefer the larger
/// score, then the smaller code.
pub fn allocate_budget(scores: &BTreeMap<String, f64>, total: u64) -> Result<BTreeMap<String, u64>, SamplerError> {
    let sum = neumaier_sum(&scores.values().copied().collect::<Vec<_>>());
    if scores.is_empty() {
        return Err(SamplerError::NoClasses);
    }
    if sum.is_nan() || (sum - 1.0).abs() > 1e-9 || scores.values().any(|s| s.is_nan() || *s < 0.0) {
        return Err(SamplerError::UnnormalizedScores(sum));
    }

    struct Share<'a> {
        code: &'a str,
        score: f64,
        floor: u64,
        frac: f64,
    }
    let mut shares: Vec<Share> = scores
        .iter()
        .map(|(code, &score)| {
            let raw = total as f64 * score;
            let floor = raw.floor();
            Share {
                code,
                score,
                floor: floor as u64,
                frac: raw - floor,
            }
        })
        .collect();
    shares.sort_by(|a, b| {
        b.frac
            .partial_cmp(&a.frac)
            .unwrap_or(Ordering::Equal)
            .then(b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal))
            .then(a.code.cmp(b.code))
    });

    let floored: u64 = shares.iter().map(|s| s.floor).sum();
    if floored <= total {
        let mut remaining = total - floored;
        let n = shares.len();
        for i in 0.. {
            if remaining == 0 {
                break;
            }
            shares[i % n].floor += 1;
            remaining -= 1;
        }
    } else {
        // Only reachable when rounding pushed Σ floor(T·s) past T; take back
        // from the smallest fractional parts.
        let mut excess = floored - total;
        for share in shares.iter_mut().rev() {
            if excess == 0 {
                break;
            }
            if share.floor > 0 {
                share.floor -= 1;
                excess -= 1;
            }
        }
    }
    Ok(shares.into_iter().map(|s| (s.code.to_owned(), s.floor)).collect())
}

/// Mean participating count, or 1 when every count is zero.
pub fn auto_lambda(counts: &BTreeMap<String, u64>) -> f64 {
    if counts.is_empty() {
        return 1.0;
    }
    let mean = counts.values().map(|&n| n as f64).sum::<f64>() / counts.len() as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Restricts counts to the participating classes (the filter, or all leaves).
pub fn participating(
    counts: &ClassCounts,
    taxonomy: &Taxonomy,
    filter: Option<&BTreeSet<String>>,
) -> Result<BTreeMap<String, u64>, SamplerError> {
    match filter {
        Some(codes) => codes
            .iter()
            .map(|c| {
                if taxonomy.contains(c) {
                    Ok((c.clone(), counts.get(c)))
                } else {
                    Err(SamplerError::UnknownClass(c.clone()))
                }
            })
            .collect(),
        None => Ok(taxonomy
            .leaves()
            .into_iter()
            .map(|c| (c.to_owned(), counts.get(c)))
            .collect()),
    }
}

/// Count, score and allocate in one pass; rows come out sorted by code.
pub fn build_plan(
    corpus: &LabeledCorpus,
    taxonomy: &Taxonomy,
    cfg: &SamplerConfig,
) -> Result<MinorityPlan, SamplerError> {
    let counts = corpus.count_per_class(taxonomy, cfg.mode)?;
    let counts = participating(&counts, taxonomy, cfg.class_filter.as_ref())?;
    if counts.is_empty() {
        return Err(SamplerError::NoClasses);
    }
    let lambda = match cfg.lambda {
        Lambda::Fixed(v) => v,
        Lambda::Auto => auto_lambda(&counts),
    };
    let scores = minority_scores(&counts, lambda)?;
    let alloc = allocate_budget(&scores, cfg.total_budget)?;
    let rows = counts
        .iter()
        .map(|(code, &n)| PlanRow {
            code: code.clone(),
            n,
            score: scores[code],
            alloc: alloc[code],
        })
        .collect();
    Ok(MinorityPlan {
        lambda,
        total: cfg.total_budget,
        mode: cfg.mode,
        rows,
    })
}
