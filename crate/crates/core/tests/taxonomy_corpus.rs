mod common;

use std::collections::{BTreeMap, BTreeSet};

use propaug::corpus::{CountingMode, LabeledCorpus, Proposal, Provenance, Source};
use propaug::taxonomy::{DisciplineNode, Taxonomy, TaxonomyError};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ancestors_match_parent_walk(seed in any::<u64>(), n in 1usize..60) {
        let (nodes, parents) = common::random_forest(seed, n);
        let t = Taxonomy::from_nodes(nodes).unwrap();
        for i in 0..n {
            let expected: Vec<String> = common::oracle_ancestors(&parents, i).into_iter().map(common::code).collect();
            let got: Vec<String> = t.ancestors(&common::code(i)).unwrap().into_iter().map(str::to_owned).collect();
            prop_assert_eq!(&got, &expected);
            prop_assert_eq!(t.level(&common::code(i)).unwrap() as usize, expected.len() + 1);
            let has_child = parents.contains(&Some(i));
            prop_assert_eq!(t.is_leaf(&common::code(i)), !has_child);
        }
    }

    #[test]
    fn closure_is_union_of_ancestor_chains(seed in any::<u64>(), n in 1usize..40, picks in prop::collection::vec(any::<prop::sample::Index>(), 0..6)) {
        let (nodes, parents) = common::random_forest(seed, n);
        let t = Taxonomy::from_nodes(nodes).unwrap();
        let labels: Vec<String> = picks.iter().map(|ix| common::code(ix.index(n))).collect();
        let mut expected = BTreeSet::new();
        for ix in &picks {
            let i = ix.index(n);
            expected.insert(common::code(i));
            expected.extend(common::oracle_ancestors(&parents, i).into_iter().map(common::code));
        }
        let closed = t.closure(&labels).unwrap();
        prop_assert_eq!(&closed, &expected);
        prop_assert_eq!(t.closure(&closed).unwrap(), closed);
    }

    #[test]
    fn taxonomy_round_trips(seed in any::<u64>(), n in 1usize..40) {
        let (nodes, _) = common::random_forest(seed, n);
        let t = Taxonomy::from_nodes(nodes).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = Taxonomy::from_reader(buf.as_slice()).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn structural_errors_are_reported() {
    let dup = Taxonomy::from_nodes([DisciplineNode::new("A", "a", None), DisciplineNode::new("A", "b", None)]);
    assert!(matches!(dup, Err(TaxonomyError::DuplicateCode(_))));
    let dangling = Taxonomy::from_nodes([DisciplineNode::new("A01", "a", Some("A"))]);
    assert!(matches!(dangling, Err(TaxonomyError::DanglingParent { .. })));
    let cycle = Taxonomy::from_nodes([
        DisciplineNode::new("A", "a", Some("B")),
        DisciplineNode::new("B", "b", Some("A")),
    ]);
    assert!(matches!(cycle, Err(TaxonomyError::Cycle(_))));
}

fn random_corpus(seed: u64, t: &Taxonomy, n: usize) -> LabeledCorpus {
    let mut r = common::rng(seed);
    let codes: Vec<&str> = t.codes().collect();
    let words = ["orbit", "gene", "star", "cell", "survey", "model", "field", "signal"];
    let proposals = (0..n)
        .map(|i| {
            let k = r.random_range(1..=2);
            let labels: Vec<String> = (0..k)
                .map(|_| codes[r.random_range(0..codes.len())].to_owned())
                .collect();
            let text: Vec<&str> = (0..r.random_range(3..12))
                .map(|_| words[r.random_range(0..words.len())])
                .collect();
            Proposal::original(
                format!("d{i:04}"),
                format!("Title {i}"),
                format!("{} {i}", text.join(" ")),
                labels,
            )
        })
        .collect();
    LabeledCorpus::new(proposals, Some(t)).unwrap()
}

#[test]
fn thousand_record_round_trip() {
    let t = common::small_taxonomy();
    let c = random_corpus(1, &t, 1000);
    let back = LabeledCorpus::from_reader(c.to_jsonl().as_bytes(), &t).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_jsonl(), c.to_jsonl());
}

#[test]
fn counts_match_naive_tally() {
    let t = common::small_taxonomy();
    let c = random_corpus(2, &t, 500);
    for mode in [CountingMode::Direct, CountingMode::Closure] {
        let mut expected: BTreeMap<String, u64> = t.codes().map(|c| (c.to_owned(), 0)).collect();
        for p in c.proposals() {
            let mut set: BTreeSet<String> = p.labels.clone();
            if mode == CountingMode::Closure {
                for l in &p.labels {
                    let mut cur = t.parent(l).unwrap();
                    while let Some(a) = cur {
                        set.insert(a.to_owned());
                        cur = t.parent(a).unwrap();
                    }
                }
            }
            for code in set {
                *expected.get_mut(&code).unwrap() += 1;
            }
        }
        assert_eq!(c.count_per_class(&t, mode).unwrap().counts, expected, "{mode}");
    }
}

#[test]
fn stratified_split_is_proportional_and_deterministic() {
    let t = common::small_taxonomy();
    let c = random_corpus(3, &t, 600);
    let (train, test) = c.split(0.25, 9).unwrap();
    assert_eq!(train.len() + test.len(), c.len());
    let key = |p: &Proposal| p.labels.iter().cloned().collect::<Vec<_>>().join("|");
    let mut all: BTreeMap<String, usize> = BTreeMap::new();
    let mut held: BTreeMap<String, usize> = BTreeMap::new();
    for p in c.proposals() {
        *all.entry(key(p)).or_default() += 1;
    }
    for p in test.proposals() {
        *held.entry(key(p)).or_default() += 1;
    }
    for (k, n) in all {
        let got = held.get(&k).copied().unwrap_or(0) as f64;
        if n >= 2 {
            assert!((got - 0.25 * n as f64).abs() <= 1.0, "stratum {k}: {got} of {n}");
        } else {
            assert_eq!(got, 0.0);
        }
    }
    let (train2, test2) = c.split(0.25, 9).unwrap();
    assert_eq!((train, test), (train2, test2));
}

fn generated(id: &str, text: &str) -> Proposal {
    Proposal {
        source: Source::Generated,
        provenance: Some(Provenance {
            prompt_hash: "h".into(),
            model: "m".into(),
            seed: 1,
            temperature: Some(0.8),
        }),
        ..Proposal::original(id, "t", text, ["A01"])
    }
}

#[test]
fn appending_is_idempotent_under_dedupe() {
    let t = common::small_taxonomy();
    let c = random_corpus(4, &t, 50);
    let batch = vec![
        generated("g1", "a brand new abstract"),
        generated("g2", "A  BRAND new\tabstract"),
    ];
    let (once, stats) = c.append_generated(batch.clone()).unwrap();
    assert_eq!((stats.appended, stats.dropped), (1, 1));
    let renamed: Vec<Proposal> = batch
        .into_iter()
        .map(|mut p| {
            p.id.push('x');
            p
        })
        .collect();
    let (twice, stats) = once.append_generated(renamed).unwrap();
    assert_eq!((stats.appended, stats.dropped), (0, 2));
    assert_eq!(twice, once);
    assert_eq!(&once.proposals()[..c.len()], c.proposals());
}

#[test]
fn generated_records_never_reach_the_test_split() {
    let t = common::small_taxonomy();
    let c = random_corpus(5, &t, 80);
    let extra: Vec<Proposal> = (0..20)
        .map(|i| generated(&format!("g{i}"), &format!("synthetic text {i}")))
        .collect();
    let (aug, _) = c.append_generated(extra).unwrap();
    let (_, test) = aug.split(0.5, 1).unwrap();
    assert!(test.proposals().iter().all(|p| !p.is_generated()));
}
