//! Baseline vs augmented classifier on the bundled imbalanced corpus.
//!
//!     cargo run --release --example end_to_end_experiment -- [total...]
//!
//! With several totals (e.g. `100 350`) the runs are compared side by side.

use std::path::Path;

use propaug::experiment::{experiment, PipelineConfig};

fn main() -> propaug::Result<()> {
    let totals: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let totals = if totals.is_empty() { vec![200] } else { totals };

    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut cfg = PipelineConfig::load(&manifest.join("data/experiment.toml"))?;
    let data = manifest.join("data/synth");
    cfg.paths.taxonomy = data.join("taxonomy.jsonl");
    cfg.paths.corpus = data.join("corpus.jsonl");
    cfg.paths.keywords = Some(data.join("keywords.json"));

    for total in totals {
        cfg.sampler.total = total;
        cfg.paths.out_dir = std::env::temp_dir().join(format!("propaug-experiment-{total}"));
        let report = experiment(&cfg)?;
        println!(
            "T = {total} (λ = {:.2}), artifacts in {}",
            report.lambda,
            cfg.paths.out_dir.display()
        );
        println!("{}", report.delta.to_table());
    }
    Ok(())
}
