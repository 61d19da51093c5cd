//! Minority scores and budget allocation at several temperatures.
//!
//!     cargo run --example minority_plan

use std::collections::BTreeMap;
use std::path::Path;

use propaug::corpus::LabeledCorpus;
use propaug::sampler::{allocate_budget, build_plan, minority_scores, Lambda, SamplerConfig};
use propaug::taxonomy::Taxonomy;

fn main() -> propaug::Result<()> {
    let counts: BTreeMap<String, u64> = [("A01", 200), ("A02", 200), ("B01", 50), ("B02", 10)]
        .into_iter()
        .map(|(c, n)| (c.to_owned(), n))
        .collect();
    println!("counts: {counts:?}");
    for lambda in [1.0, 20.0, 115.0, 1000.0] {
        let scores = minority_scores(&counts, lambda)?;
        let alloc = allocate_budget(&scores, 350)?;
        let row: Vec<String> = scores.iter().map(|(c, s)| format!("{c} {s:.3}→{}", alloc[c])).collect();
        println!("λ = {lambda:>6}: {}", row.join("  "));
    }

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synth");
    let t = Taxonomy::load(&data.join("taxonomy.jsonl"))?;
    let corpus = LabeledCorpus::load(&data.join("corpus.jsonl"), &t)?;
    let plan = build_plan(&corpus, &t, &SamplerConfig::new(Lambda::Auto, 200)?)?;
    println!("\nbundled corpus, λ = auto ({:.2}), T = {}:", plan.lambda, plan.total);
    for r in &plan.rows {
        println!("  {:<4} n = {:>3}  s = {:.4}  f = {}", r.code, r.n, r.score, r.alloc);
    }
    Ok(())
}
