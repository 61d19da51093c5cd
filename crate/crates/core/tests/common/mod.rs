//! Test oracles and fixtures shared by the integration tests and the
//! acceptance runner. The reference functions are direct transcriptions of
//! their definitions and do not call the library's numeric code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use propaug::classifier::{fit_vectorizer, objective, transform, FeatureVector};
use propaug::corpus::{LabeledCorpus, Proposal};
use propaug::metrics::{evaluate, EvalScope};
use propaug::taxonomy::{DisciplineNode, Taxonomy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// s_c = 1 / Σ_i exp((n_c − n_i)/λ), summed smallest term first.
pub fn oracle_score(counts: &[u64], c: usize, lambda: f64) -> f64 {
    let mut terms: Vec<f64> = counts
        .iter()
        .map(|&n_i| ((counts[c] as f64 - n_i as f64) / lambda).exp())
        .collect();
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    1.0 / sum
}

pub fn code(i: usize) -> String {
    format!("C{i:05}")
}

pub fn counts_map(counts: &[u64]) -> BTreeMap<String, u64> {
    counts.iter().enumerate().map(|(i, &n)| (code(i), n)).collect()
}

/// Per-definition multi-label metrics over a flat class list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveMetrics {
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn f1(p: f64, r: f64) -> f64 {
    safe_div(2.0 * p * r, p + r)
}

pub fn naive_metrics(
    gold: &[BTreeSet<String>],
    pred: &[BTreeSet<String>],
    classes: &[String],
) -> (NaiveMetrics, BTreeMap<String, f64>) {
    let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
    let mut per_class = BTreeMap::new();
    let mut macro_sum = 0.0;
    let mut macro_n = 0.0;
    for c in classes {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for d in 0..gold.len() {
            match (gold[d].contains(c), pred[d].contains(c)) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                (false, false) => {}
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let class_f1 = f1(safe_div(tp, tp + fp), safe_div(tp, tp + fn_));
        per_class.insert(c.clone(), class_f1);
        if tp + fn_ > 0.0 {
            macro_sum += class_f1;
            macro_n += 1.0;
        }
    }
    let micro_p = safe_div(tp_all, tp_all + fp_all);
    let micro_r = safe_div(tp_all, tp_all + fn_all);
    (
        NaiveMetrics {
            micro_p,
            micro_r,
            micro_f1: f1(micro_p, micro_r),
            macro_f1: safe_div(macro_sum, macro_n),
        },
        per_class,
    )
}

/// Random forest: `n` nodes, each node's parent drawn among earlier nodes (or none).
pub fn random_forest(seed: u64, n: usize) -> (Vec<DisciplineNode>, Vec<Option<usize>>) {
    let mut r = rng(seed);
    let mut parents = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let parent = if i == 0 || r.random_bool(0.25) {
            None
        } else {
            Some(r.random_range(0..i))
        };
        parents.push(parent);
        let parent_code = parent.map(code);
        nodes.push(DisciplineNode::new(
            code(i),
            format!("Node {i}"),
            parent_code.as_deref(),
        ));
    }
    (nodes, parents)
}

/// Ancestors by walking the raw parent array.
pub fn oracle_ancestors(parents: &[Option<usize>], mut i: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(p) = parents[i] {
        out.push(p);
        i = p;
    }
    out
}

/// Small fixed taxonomy used across tests: two roots, four leaves, one grandchild.
pub fn small_taxonomy() -> Taxonomy {
    Taxonomy::from_nodes([
        DisciplineNode::new("A", "Mathematical and Physical Sciences", None),
        DisciplineNode::new("A01", "Mathematics", Some("A")),
        DisciplineNode::new("A02", "Astronomy", Some("A")),
        DisciplineNode::new("A0201", "History of Astronomy", Some("A02")),
        DisciplineNode::new("B", "Life Sciences", None),
        DisciplineNode::new("B01", "Genetics", Some("B")),
        DisciplineNode::new("B02", "Ecology", Some("B")),
    ])
    .unwrap()
}

pub fn bundled_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("synth")
}

/// Every regular file under `dir`, relative path → bytes.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Named reference prompt specs with committed renderings under `tests/golden/`.
pub fn reference_prompt_specs() -> Vec<(&'static str, propaug::promptgen::PromptSpec)> {
    use propaug::promptgen::{PromptSpec, WordRange};
    let astro = |keywords: &[&str]| {
        PromptSpec::new(
            "A0201",
            vec!["Astronomy".into(), "History of Astronomy".into()],
            keywords.iter().map(|s| s.to_string()).collect(),
        )
    };
    let mut genetics = PromptSpec::new(
        "B01",
        vec!["Life Sciences".into(), "Genetics".into()],
        vec![
            "CRISPR screening".into(),
            "gene regulatory networks".into(),
            "plant stress".into(),
        ],
    );
    genetics.language_style = "formal-academic-chinese".into();
    let mut ecology = PromptSpec::new("B02", vec!["Life Sciences".into(), "Ecology".into()], vec![]);
    ecology
        .section_lengths
        .insert("abstract".into(), WordRange::new(80, 120));
    ecology.seed_exemplar = Some("We study how wetland plant communities recover after drought.".into());
    vec![
        ("astronomy_keyword", astro(&["Astronomical Earth Survey"])),
        ("astronomy_no_keyword", astro(&[])),
        ("genetics_three_keywords_chinese", genetics),
        ("ecology_exemplar_short", ecology),
    ]
}

/// Compares `actual` with the golden file `name`, rewriting it when `PROPAUG_BLESS` is set.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("PROPAUG_BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from the rendered prompt", path.display()))
    }
}

/// Central differences on the 5-document, 3-class fixture; returns the worst relative error.
pub fn gradient_check_error() -> f64 {
    let texts = [
        "stellar orbit survey telescope",
        "gene cell protein expression",
        "orbit planet survey comet",
        "cell membrane gene enzyme",
        "telescope star gene survey",
    ];
    let ps: Vec<Proposal> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Proposal::original(format!("d{i}"), "t", *t, ["X"]))
        .collect();
    let c = LabeledCorpus::new(ps, None).unwrap();
    let vocab = fit_vectorizer(&c, 1).unwrap();
    let rows: Vec<FeatureVector> = texts.iter().map(|t| transform(&vocab, t)).collect();
    let classes = [
        [1.0, 0.0, 1.0, 0.0, 1.0],
        [0.0, 1.0, 0.0, 1.0, 1.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
    ];
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for targets in classes {
        let w: Vec<f64> = (0..vocab.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let b = r.random_range(-0.5..0.5);
        let l2 = 0.1;
        let (_, gw, gb) = objective(&rows, &targets, &w, b, l2);
        let h = 1e-5;
        let mut analytic = gw.clone();
        analytic.push(gb);
        let mut numeric = Vec::new();
        for i in 0..=w.len() {
            let eval = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if i < w.len() {
                    w2[i] += delta;
                } else {
                    b2 += delta;
                }
                objective(&rows, &targets, &w2, b2, l2).0
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 =
            analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
        worst = worst.max(diff / scale);
    }
    worst
}

fn random_labels(r: &mut impl Rng, classes: &[String]) -> BTreeSet<String> {
    classes.iter().filter(|_| r.random_bool(0.3)).cloned().collect()
}

/// Returns the largest deviation from the naive oracle over `cases` random corpora.
pub fn metrics_oracle_deviation(cases: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut r = rng(1000 + seed);
        let k = r.random_range(1..8);
        let classes: Vec<String> = (0..k).map(code).collect();
        let n = r.random_range(1..40);
        let gold: Vec<_> = (0..n).map(|_| random_labels(&mut r, &classes)).collect();
        let pred: Vec<_> = (0..n).map(|_| random_labels(&mut r, &classes)).collect();
        let report = evaluate(&gold, &pred, &EvalScope::flat(classes.clone())).unwrap();
        let (naive, per_class) = naive_metrics(&gold, &pred, &classes);
        for (a, b) in [
            (report.overall.micro_precision, naive.micro_p),
            (report.overall.micro_recall, naive.micro_r),
            (report.overall.micro_f1, naive.micro_f1),
            (report.overall.macro_f1, naive.macro_f1),
        ] {
            worst = worst.max((a - b).abs());
        }
        for row in &report.per_class {
            worst = worst.max((row.f1 - per_class[&row.code]).abs());
        }
    }
    worst
}
