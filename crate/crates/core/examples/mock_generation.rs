//! Generate synthetic proposals offline with the class-conditional mock backend.
//!
//!     cargo run --example mock_generation

use std::path::Path;

use propaug::corpus::LabeledCorpus;
use propaug::generator::{generate_batch, GenerationRequest, MockGenerator};
use propaug::promptgen::{render, spec_for_class, KeywordTable, PromptConfig};
use propaug::taxonomy::Taxonomy;

fn main() -> propaug::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synth");
    let t = Taxonomy::load(&data.join("taxonomy.jsonl"))?;
    let corpus = LabeledCorpus::load(&data.join("corpus.jsonl"), &t)?;
    let keywords = KeywordTable::load(&data.join("keywords.json"))?;
    let mock = MockGenerator::new(&corpus, &t);

    let requests = ["B02", "B03"]
        .iter()
        .enumerate()
        .map(|(i, code)| {
            let spec = spec_for_class(&t, &keywords, code, &PromptConfig::default(), i as u64)?;
            let prompt = render(&spec)?;
            Ok(GenerationRequest {
                spec,
                prompt,
                target_class: (*code).to_owned(),
                request_index: i as u64,
                seed: 1000 + i as u64,
            })
        })
        .collect::<propaug::Result<Vec<_>>>()?;

    for outcome in generate_batch(&requests, &mock, &t) {
        match outcome.result {
            Ok(p) => {
                let preview: String = p.abstract_text.chars().take(160).collect();
                println!(
                    "{} {:?}\n  title: {}\n  keywords: {}\n  abstract: {preview}...\n",
                    p.id,
                    p.labels,
                    p.title,
                    p.keywords.join(", ")
                );
            }
            Err(f) => println!("request {} failed: {:?} {}", outcome.request_index, f.kind, f.detail),
        }
    }
    Ok(())
}
