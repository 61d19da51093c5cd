//! Micro/macro metrics over hierarchical label sets, and a baseline-vs-augmented delta.
//!
//!     cargo run --example evaluate_metrics

use std::collections::BTreeSet;

use propaug::metrics::{evaluate, improvement, EvalScope};
use propaug::taxonomy::{DisciplineNode, Taxonomy};

fn labels(t: &Taxonomy, leaf: &[&str]) -> BTreeSet<String> {
    t.closure(leaf.iter()).expect("known codes")
}

fn main() -> propaug::Result<()> {
    let t = Taxonomy::from_nodes([
        DisciplineNode::new("A", "Physics", None),
        DisciplineNode::new("A01", "Optics", Some("A")),
        DisciplineNode::new("A02", "Acoustics", Some("A")),
        DisciplineNode::new("B", "Biology", None),
        DisciplineNode::new("B01", "Ecology", Some("B")),
    ])?;
    let gold: Vec<_> = [["A01"], ["A01"], ["A02"], ["B01"]]
        .iter()
        .map(|l| labels(&t, l))
        .collect();
    let baseline: Vec<_> = [["A01"], ["A01"], ["A01"], ["A01"]]
        .iter()
        .map(|l| labels(&t, l))
        .collect();
    let augmented: Vec<_> = [["A01"], ["A01"], ["A02"], ["A01"]]
        .iter()
        .map(|l| labels(&t, l))
        .collect();

    let scope = EvalScope::all_nodes(&t);
    let before = evaluate(&gold, &baseline, &scope)?;
    let after = evaluate(&gold, &augmented, &scope)?;
    println!(
        "baseline:  micro F1 {:.4}, macro F1 {:.4}",
        before.micro_f1(),
        before.macro_f1()
    );
    println!(
        "augmented: micro F1 {:.4}, macro F1 {:.4}",
        after.micro_f1(),
        after.macro_f1()
    );
    for (level, agg) in &after.per_level {
        println!(
            "  level {level}: micro F1 {:.4}, macro F1 {:.4}",
            agg.micro_f1, agg.macro_f1
        );
    }
    println!("\n{}", improvement(&before, &after)?.to_table());

    let leaves = evaluate(&gold, &augmented, &EvalScope::leaves_only(&t))?;
    println!(
        "leaves only: micro F1 {:.4}, macro F1 {:.4}",
        leaves.micro_f1(),
        leaves.macro_f1()
    );
    Ok(())
}
