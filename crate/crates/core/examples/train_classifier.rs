//! Train the hierarchical classifier and inspect its predictions.
//!
//!     cargo run --release --example train_classifier

use std::path::Path;

use propaug::classifier::{train, TrainConfig, DEFAULT_THRESHOLD};
use propaug::corpus::LabeledCorpus;
use propaug::taxonomy::Taxonomy;

fn main() -> propaug::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synth");
    let t = Taxonomy::load(&data.join("taxonomy.jsonl"))?;
    let corpus = LabeledCorpus::load(&data.join("corpus.jsonl"), &t)?;
    let (train_set, test_set) = corpus.split(0.2, 7)?;

    let model = train(&train_set, &t, &TrainConfig::default())?;
    println!(
        "{} features, {} class models",
        model.vocabulary.len(),
        model.classes.len()
    );
    for c in &model.classes {
        println!(
            "  {:<4} positives {:>3}  final loss {:.4}",
            c.code, c.positives, c.final_loss
        );
    }

    for p in test_set.proposals().iter().take(5) {
        let scores = model.scores(&p.abstract_text);
        let predicted = model.predict(&p.abstract_text, DEFAULT_THRESHOLD);
        let best = scores
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(c, s)| format!("{c} {s:.3}"));
        println!(
            "{}: gold {:?}, predicted {:?}, top score {}",
            p.id,
            p.labels,
            predicted,
            best.unwrap_or_default()
        );
    }

    let path = std::env::temp_dir().join("propaug-model.bin");
    model.save(&path)?;
    println!("model written to {}", path.display());
    Ok(())
}
