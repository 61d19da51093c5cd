mod common;

use std::collections::{BTreeMap, BTreeSet};

use propaug::classifier::{fit_binary, fit_vectorizer, idf, tokenize, train, transform, FeatureVector, TrainConfig};
use propaug::corpus::{LabeledCorpus, Proposal};
use propaug::metrics::{evaluate, improvement, EvalScope};
use proptest::prelude::*;
use rand::Rng;

fn random_docs(seed: u64, n: usize) -> LabeledCorpus {
    let mut r = common::rng(seed);
    let vocab: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
    let ps = (0..n)
        .map(|i| {
            let len = r.random_range(1..25);
            let text: Vec<&str> = (0..len)
                .map(|_| vocab[r.random_range(0..vocab.len())].as_str())
                .collect();
            Proposal::original(format!("d{i}"), "t", text.join(" "), ["X"])
        })
        .collect();
    LabeledCorpus::new(ps, None).unwrap()
}

#[test]
fn idf_matches_reference_on_random_docs() {
    let c = random_docs(11, 100);
    let vocab = fit_vectorizer(&c, 1).unwrap();
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for p in c.proposals() {
        let uniq: BTreeSet<String> = tokenize(&p.abstract_text).into_iter().collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    assert_eq!(vocab.tokens, df.keys().cloned().collect::<Vec<_>>());
    for (i, (_, &d)) in df.iter().enumerate() {
        let expected = ((1.0 + 100.0) / (1.0 + d as f64)).ln() + 1.0;
        assert!((vocab.idf[i] - expected).abs() < 1e-15);
        assert!((idf(100, d) - expected).abs() < 1e-15);
    }
}

#[test]
fn min_df_keeps_only_shared_tokens() {
    let c = LabeledCorpus::new(
        vec![
            Proposal::original("a", "t", "shared alpha", ["X"]),
            Proposal::original("b", "t", "shared beta", ["X"]),
        ],
        None,
    )
    .unwrap();
    assert_eq!(fit_vectorizer(&c, 2).unwrap().tokens, ["shared"]);
}

proptest! {
    #[test]
    fn feature_vectors_are_unit_or_empty(text in "[a-z ]{0,200}") {
        let c = random_docs(12, 30);
        let vocab = fit_vectorizer(&c, 1).unwrap();
        let v = transform(&vocab, &text);
        prop_assert!(v.is_empty() || (v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tokenize_is_idempotent(text in "\\PC{0,80}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let err = common::gradient_check_error();
    assert!(err < 1e-5, "relative error {err:e}");
}

#[test]
fn loss_decreases_monotonically_on_separable_data() {
    let texts = ["alpha beta", "alpha gamma", "delta epsilon", "delta zeta"];
    let ps: Vec<Proposal> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Proposal::original(format!("d{i}"), "t", *t, ["X"]))
        .collect();
    let c = LabeledCorpus::new(ps, None).unwrap();
    let vocab = fit_vectorizer(&c, 1).unwrap();
    let rows: Vec<FeatureVector> = texts.iter().map(|t| transform(&vocab, t)).collect();
    let (_, _, history) = fit_binary(&rows, &[1.0, 1.0, 0.0, 0.0], vocab.len(), &TrainConfig::default());
    assert!(history.windows(2).all(|w| w[1] <= w[0]));
    assert!(history.last().unwrap() < &0.2);
}

#[test]
fn predictions_are_hierarchy_consistent() {
    let t = common::small_taxonomy();
    let mut ps = Vec::new();
    let topics = [
        ("A01", "algebra topology proof lemma"),
        ("A0201", "telescope archive chronicle eclipse"),
        ("B01", "gene allele genome locus"),
        ("B02", "wetland species habitat drought"),
    ];
    for (code, words) in topics {
        for i in 0..6 {
            ps.push(Proposal::original(
                format!("{code}{i}"),
                "t",
                format!("{words} common filler{i}"),
                [code],
            ));
        }
    }
    let c = LabeledCorpus::new(ps, Some(&t)).unwrap();
    let model = train(
        &c,
        &t,
        &TrainConfig {
            min_df: 1,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    for text in ["telescope eclipse", "wetland gene", "nothing known here", ""] {
        for threshold in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let pred = model.predict(text, threshold);
            assert!(!pred.is_empty());
            assert_eq!(t.closure(&pred).unwrap(), pred, "{text} @ {threshold}");
        }
    }
    assert!(model
        .predict("telescope archive chronicle eclipse", 0.5)
        .contains("A0201"));
}

#[test]
fn metrics_match_naive_oracle() {
    assert!(common::metrics_oracle_deviation(100) <= 1e-12);
}

#[test]
fn hand_computed_metrics_case() {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
    let gold = [s(&["A"]), s(&["A", "B"])];
    let pred = [s(&["A", "B"]), s(&["A"])];
    let r = evaluate(&gold, &pred, &EvalScope::flat(["A", "B"])).unwrap();
    assert!((r.micro_f1() - 2.0 / 3.0).abs() < 1e-15);
    assert!((r.overall.micro_precision - 2.0 / 3.0).abs() < 1e-15);
    assert!((r.macro_f1() - 0.5).abs() < 1e-15);
    let exact = evaluate(&gold, &gold, &EvalScope::flat(["A", "B"])).unwrap();
    assert_eq!((exact.micro_f1(), exact.macro_f1()), (1.0, 1.0));
    let delta = improvement(&r, &exact).unwrap();
    assert!((delta.metric("macro_f1").unwrap().absolute - 0.5).abs() < 1e-15);
    assert_eq!(delta.per_class.first().unwrap().code, "B");
}
