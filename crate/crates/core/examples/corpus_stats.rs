//! Load the bundled synthetic corpus, count proposals per discipline and split it.
//!
//!     cargo run --example corpus_stats

use std::path::Path;

use propaug::corpus::{CountingMode, LabeledCorpus};
use propaug::taxonomy::Taxonomy;

fn main() -> propaug::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synth");
    let t = Taxonomy::load(&data.join("taxonomy.jsonl"))?;
    let corpus = LabeledCorpus::load(&data.join("corpus.jsonl"), &t)?;

    let direct = corpus.count_per_class(&t, CountingMode::Direct)?;
    let closure = corpus.count_per_class(&t, CountingMode::Closure)?;
    println!("{:<6} {:>6} {:>8}", "code", "direct", "closure");
    for code in t.codes() {
        println!("{code:<6} {:>6} {:>8}", direct.get(code), closure.get(code));
    }

    let (train, test) = corpus.split(0.2, 42)?;
    println!("\nsplit 80/20: {} train, {} test", train.len(), test.len());
    let test_counts = test.count_per_class(&t, CountingMode::Direct)?;
    for leaf in t.leaves() {
        println!("  {leaf}: {} held out", test_counts.get(leaf));
    }
    Ok(())
}
