//! Multi-label evaluation: micro/macro F1, precision, recall, per-class and
//! per-level breakdowns, and baseline-vs-augmented deltas.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Taxonomy;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold has {gold} label sets but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("unknown class code {0}")]
    UnknownCode(String),
    #[error("reports cover different class sets")]
    ClassSetMismatch,
}

/// Which codes are scored, and their taxonomy levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalScope {
    pub node_set: NodeSet,
    /// Scored classes with their level, in code order.
    pub classes: BTreeMap<String, u32>,
    /// Every code allowed to appear in label sets.
    #[serde(skip)]
    pub known: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeSet {
    #[default]
    AllNodes,
    LeavesOnly,
    Custom,
}

impl EvalScope {
    pub fn all_nodes(t: &Taxonomy) -> Self {
        EvalScope {
            node_set: NodeSet::AllNodes,
            classes: t.levels().clone(),
            known: t.codes().map(str::to_owned).collect(),
        }
    }

    pub fn leaves_only(t: &Taxonomy) -> Self {
        EvalScope {
            node_set: NodeSet::LeavesOnly,
            classes: t
                .leaves()
                .into_iter()
                .map(|c| (c.to_owned(), t.level(c).expect("leaf is known")))
                .collect(),
            known: t.codes().map(str::to_owned).collect(),
        }
    }

    /// A flat scope: every code is a level-1 class.
    pub fn flat<I: IntoIterator<Item = S>, S: Into<String>>(codes: I) -> Self {
        let classes: BTreeMap<String, u32> = codes.into_iter().map(|c| (c.into(), 1)).collect();
        EvalScope {
            node_set: NodeSet::Custom,
            known: classes.keys().cloned().collect(),
            classes,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }

    fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub code: String,
    pub level: u32,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Classes with gold support ≥ 1, the ones averaged into macro F1.
    pub macro_classes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: u64,
    pub node_set: NodeSet,
    pub zero_support: String,
    #[serde(flatten)]
    pub overall: Aggregate,
    pub per_level: BTreeMap<u32, Aggregate>,
    pub per_class: Vec<ClassRow>,
    /// Free-form settings echoed for auditability (threshold, model choices...).
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn micro_f1(&self) -> f64 {
        self.overall.micro_f1
    }

    pub fn macro_f1(&self) -> f64 {
        self.overall.macro_f1
    }

    pub fn class(&self, code: &str) -> Option<&ClassRow> {
        self.per_class.iter().find(|r| r.code == code)
    }
}

fn aggregate<'a>(rows: impl Iterator<Item = &'a Confusion>) -> Aggregate {
    let mut pooled = Confusion::default();
    let mut f1_sum = 0.0;
    let mut supported = 0u64;
    for c in rows {
        pooled.add(c);
        if c.support() > 0 {
            f1_sum += c.f1();
            supported += 1;
        }
    }
    Aggregate {
        micro_precision: pooled.precision(),
        micro_recall: pooled.recall(),
        micro_f1: pooled.f1(),
        macro_f1: if supported == 0 { 0.0 } else { f1_sum / supported as f64 },
        macro_classes: supported,
    }
}

/// Scores predicted label sets against gold label sets, document by document.
///
/// Micro metrics pool TP/FP/FN over every scored class; macro F1 averages
/// per-class F1 over classes with gold support, the rest still appear in the table.
pub fn evaluate(
    gold: &[BTreeSet<String>],
    pred: &[BTreeSet<String>],
    scope: &EvalScope,
) -> Result<EvalReport, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut table: BTreeMap<&str, Confusion> = scope
        .classes
        .keys()
        .map(|c| (c.as_str(), Confusion::default()))
        .collect();
    for (g, p) in gold.iter().zip(pred) {
        for code in g.iter().chain(p) {
            if !scope.known.contains(code) {
                return Err(MetricsError::UnknownCode(code.clone()));
            }
        }
        for code in g.union(p) {
            let Some(cell) = table.get_mut(code.as_str()) else {
                continue;
            };
            match (g.contains(code), p.contains(code)) {
                (true, true) => cell.tp += 1,
                (false, true) => cell.fp += 1,
                (true, false) => cell.fn_ += 1,
                (false, false) => unreachable!(),
            }
        }
    }

    let overall = aggregate(table.values());
    let levels: BTreeSet<u32> = scope.classes.values().copied().collect();
    let per_level = levels
        .into_iter()
        .map(|level| {
            let rows = table
                .iter()
                .filter(|(code, _)| scope.classes[**code] == level)
                .map(|(_, c)| c);
            (level, aggregate(rows))
        })
        .collect();
    let per_class = table
        .iter()
        .map(|(code, c)| ClassRow {
            code: (*code).to_owned(),
            level: scope.classes[*code],
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            support: c.support(),
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
        })
        .collect();

    Ok(EvalReport {
        documents: gold.len() as u64,
        node_set: scope.node_set,
        zero_support: "excluded from macro average".into(),
        overall,
        per_level,
        per_class,
        notes: BTreeMap::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub baseline: f64,
    pub augmented: f64,
    pub absolute: f64,
    /// `absolute / baseline`; absent when the baseline is 0.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub code: String,
    pub support: u64,
    pub baseline_f1: f64,
    pub augmented_f1: f64,
    pub delta_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub metrics: Vec<MetricDelta>,
    /// Sorted by gold support ascending, so minority classes come first.
    pub per_class: Vec<ClassDelta>,
}

impl DeltaReport {
    pub fn metric(&self, name: &str) -> Option<&MetricDelta> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:>10} {:>10} {:>10}",
            "metric", "baseline", "augmented", "abs", "rel"
        );
        for m in &self.metrics {
            let rel = m.relative.map_or("n/a".to_owned(), |r| format!("{:+.2}%", r * 100.0));
            let _ = writeln!(
                out,
                "{:<16} {:>10.4} {:>10.4} {:>+10.4} {:>10}",
                m.metric, m.baseline, m.augmented, m.absolute, rel
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:>10} {:>10} {:>10}",
            "class", "support", "base F1", "aug F1", "delta"
        );
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:<16} {:>10} {:>10.4} {:>10.4} {:>+10.4}",
                c.code, c.support, c.baseline_f1, c.augmented_f1, c.delta_f1
            );
        }
        out
    }
}

/// Absolute and relative change of every headline metric, plus per-class F1 deltas.
pub fn improvement(baseline: &EvalReport, augmented: &EvalReport) -> Result<DeltaReport, MetricsError> {
    let codes = |r: &EvalReport| r.per_class.iter().map(|c| c.code.clone()).collect::<Vec<_>>();
    if codes(baseline) != codes(augmented) {
        return Err(MetricsError::ClassSetMismatch);
    }
    let pairs = [
        ("micro_f1", baseline.overall.micro_f1, augmented.overall.micro_f1),
        ("macro_f1", baseline.overall.macro_f1, augmented.overall.macro_f1),
        (
            "micro_precision",
            baseline.overall.micro_precision,
            augmented.overall.micro_precision,
        ),
        (
            "micro_recall",
            baseline.overall.micro_recall,
            augmented.overall.micro_recall,
        ),
    ];
    let metrics = pairs
        .into_iter()
        .map(|(name, b, a)| MetricDelta {
            metric: name.to_owned(),
            baseline: b,
            augmented: a,
            absolute: a - b,
            relative: (b != 0.0).then(|| (a - b) / b),
        })
        .collect();
    let mut per_class: Vec<ClassDelta> = baseline
        .per_class
        .iter()
        .zip(&augmented.per_class)
        .map(|(b, a)| ClassDelta {
            code: b.code.clone(),
            support: b.support,
            baseline_f1: b.f1,
            augmented_f1: a.f1,
            delta_f1: a.f1 - b.f1,
        })
        .collect();
    per_class.sort_by(|x, y| x.support.cmp(&y.support).then_with(|| x.code.cmp(&y.code)));
    Ok(DeltaReport { metrics, per_class })
}
