mod common;

use std::collections::BTreeMap;

use propaug::corpus::{LabeledCorpus, Proposal};
use propaug::sampler::{
    allocate_budget, auto_lambda, build_plan, minority_scores, Lambda, SamplerConfig, SamplerError,
};
use proptest::prelude::*;

fn arb_instance() -> impl Strategy<Value = (Vec<u64>, f64)> {
    (prop::collection::vec(0u64..500, 1..40), 1.0f64..1000.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scores_match_direct_formula((counts, lambda) in arb_instance()) {
        let s = minority_scores(&common::counts_map(&counts), lambda).unwrap();
        for i in 0..counts.len() {
            let expected = common::oracle_score(&counts, i, lambda);
            prop_assert!((s[&common::code(i)] - expected).abs() <= 1e-9);
        }
        prop_assert!((s.values().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fewer_documents_never_score_lower((counts, lambda) in arb_instance()) {
        let s = minority_scores(&common::counts_map(&counts), lambda).unwrap();
        for i in 0..counts.len() {
            for j in 0..counts.len() {
                if counts[i] < counts[j] {
                    prop_assert!(s[&common::code(i)] > s[&common::code(j)]);
                } else if counts[i] == counts[j] {
                    prop_assert_eq!(s[&common::code(i)], s[&common::code(j)]);
                }
            }
        }
    }

    #[test]
    fn uniform_shift_leaves_scores_unchanged((counts, lambda) in arb_instance(), k in 0u64..10_000) {
        let base = minority_scores(&common::counts_map(&counts), lambda).unwrap();
        let shifted: Vec<u64> = counts.iter().map(|n| n + k).collect();
        let moved = minority_scores(&common::counts_map(&shifted), lambda).unwrap();
        for (c, v) in &base {
            prop_assert!((v - moved[c]).abs() <= 1e-12);
        }
    }

    #[test]
    fn relabeling_permutes_scores((counts, lambda) in arb_instance(), rot in 0usize..40) {
        let n = counts.len();
        let rotated: Vec<u64> = (0..n).map(|i| counts[(i + rot) % n]).collect();
        let a = minority_scores(&common::counts_map(&counts), lambda).unwrap();
        let b = minority_scores(&common::counts_map(&rotated), lambda).unwrap();
        for i in 0..n {
            prop_assert_eq!(b[&common::code(i)], a[&common::code((i + rot) % n)]);
        }
    }

    #[test]
    fn allocation_is_exact((counts, lambda) in arb_instance(), total in 1u64..5000) {
        let s = minority_scores(&common::counts_map(&counts), lambda).unwrap();
        let f = allocate_budget(&s, total).unwrap();
        prop_assert_eq!(f.values().sum::<u64>(), total);
        for (c, &fc) in &f {
            prop_assert!((fc as f64 - total as f64 * s[c]).abs() < 1.0);
        }
    }
}

#[test]
fn temperature_limits() {
    let counts = [5u64, 5, 9, 40];
    let sharp = minority_scores(&common::counts_map(&counts), 1e-6).unwrap();
    assert!((sharp[&common::code(0)] - 0.5).abs() < 1e-12);
    assert!((sharp[&common::code(1)] - 0.5).abs() < 1e-12);
    assert!(sharp[&common::code(3)] < 1e-300);
    let flat = minority_scores(&common::counts_map(&counts), 1e12).unwrap();
    for v in flat.values() {
        assert!((v - 0.25).abs() < 1e-9);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(
        minority_scores(&BTreeMap::new(), 1.0),
        Err(SamplerError::NoClasses)
    ));
    for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(
            minority_scores(&common::counts_map(&[1]), bad),
            Err(SamplerError::InvalidLambda(_))
        ));
    }
    let unnormalized: BTreeMap<String, f64> = [("a".to_owned(), 0.7), ("b".to_owned(), 0.7)].into();
    assert!(matches!(
        allocate_budget(&unnormalized, 10),
        Err(SamplerError::UnnormalizedScores(_))
    ));
    assert!(SamplerConfig::new(Lambda::Auto, 0).is_err());
}

#[test]
fn hand_allocation_case() {
    let s: BTreeMap<String, f64> = [("x".to_owned(), 0.731059), ("y".to_owned(), 0.268941)].into();
    let f = allocate_budget(&s, 100).unwrap();
    assert_eq!((f["x"], f["y"]), (73, 27));
}

#[test]
fn ten_thousand_classes_are_fast() {
    let mut r = common::rng(3);
    let counts: Vec<u64> = (0..10_000).map(|_| rand::Rng::random_range(&mut r, 0..500)).collect();
    let map = common::counts_map(&counts);
    let start = std::time::Instant::now();
    let s = minority_scores(&map, 50.0).unwrap();
    let f = allocate_budget(&s, 1_000_000).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert_eq!(f.values().sum::<u64>(), 1_000_000);
}

/// Plan built from a corpus equals scores computed by hand from its leaf counts.
#[test]
fn plan_composes_counting_scoring_and_allocation() {
    let t = common::small_taxonomy();
    let spread = [("A01", 30usize), ("A0201", 4), ("B01", 12), ("B02", 1)];
    let mut ps = Vec::new();
    for (code, n) in spread {
        for i in 0..n {
            ps.push(Proposal::original(
                format!("{code}-{i}"),
                "t",
                format!("text {code} {i}"),
                [code],
            ));
        }
    }
    let corpus = LabeledCorpus::new(ps, Some(&t)).unwrap();
    for total in [350u64, 1000] {
        let plan = build_plan(&corpus, &t, &SamplerConfig::new(Lambda::Auto, total).unwrap()).unwrap();
        let leaf_counts: Vec<u64> = spread.iter().map(|(_, n)| *n as u64).collect();
        let lambda = leaf_counts.iter().sum::<u64>() as f64 / leaf_counts.len() as f64;
        assert!((plan.lambda - lambda).abs() < 1e-12);
        assert!((auto_lambda(&common::counts_map(&leaf_counts)) - lambda).abs() < 1e-12);
        for (i, (code, _)) in spread.iter().enumerate() {
            let row = plan.rows.iter().find(|r| r.code == *code).unwrap();
            assert!((row.score - common::oracle_score(&leaf_counts, i, lambda)).abs() < 1e-12);
            assert!((row.alloc as f64 - total as f64 * row.score).abs() < 1.0);
        }
        assert_eq!(plan.allocated(), total);
        assert_eq!(plan.rows.len(), 4);
    }
}
