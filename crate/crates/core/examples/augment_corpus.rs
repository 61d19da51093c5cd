//! Run the augmentation loop on the bundled corpus and write its artifacts.
//!
//!     cargo run --example augment_corpus -- [total] [out-dir]

use std::path::{Path, PathBuf};

use propaug::augment::{run_augmentation, top_up, AugmentInputs};
use propaug::corpus::{CountingMode, LabeledCorpus};
use propaug::experiment::{write_augment_artifacts, RunStamp};
use propaug::generator::MockGenerator;
use propaug::promptgen::{KeywordTable, PromptConfig};
use propaug::sampler::{Lambda, SamplerConfig};
use propaug::taxonomy::Taxonomy;

fn main() -> propaug::Result<()> {
    let mut args = std::env::args().skip(1);
    let total: u64 = args
        .next()
        .map_or(Ok(200), |s| s.parse())
        .map_err(|e| propaug::Error::Config(format!("total: {e}")))?;
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("propaug-augment"), PathBuf::from);

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synth");
    let t = Taxonomy::load(&data.join("taxonomy.jsonl"))?;
    let corpus = LabeledCorpus::load(&data.join("corpus.jsonl"), &t)?;
    let keywords = KeywordTable::load(&data.join("keywords.json"))?;
    let sampler = SamplerConfig::new(Lambda::Auto, total)?;
    let prompt = PromptConfig::default();
    let inputs = AugmentInputs {
        corpus: &corpus,
        taxonomy: &t,
        keywords: &keywords,
        sampler: &sampler,
        prompt: &prompt,
    };
    let mock = MockGenerator::new(&corpus, &t);

    let (mut run, mut augmented) = run_augmentation(&inputs, &mock, 42)?;
    while !run.failures.is_empty() && run.top_up_rounds < 3 {
        (run, augmented) = top_up(&run, &augmented, &inputs, &mock)?;
    }

    let before = corpus.count_per_class(&t, CountingMode::Direct)?;
    let after = augmented.count_per_class(&t, CountingMode::Direct)?;
    for leaf in t.leaves() {
        println!("{leaf}: {:>4} → {:>4}", before.get(leaf), after.get(leaf));
    }
    println!(
        "requested {}, succeeded {}, appended {}, dropped {}, corpus {} → {}",
        run.requested(),
        run.succeeded,
        run.appended,
        run.dropped,
        run.original_size,
        run.augmented_size
    );

    std::fs::create_dir_all(&out).map_err(|e| propaug::Error::io(&out, e))?;
    let stamp = RunStamp {
        config_hash: propaug::util::sha256_hex(format!("augment_corpus example, T={total}")),
        seed: 42,
    };
    write_augment_artifacts(&out, &stamp, &run, &augmented)?;
    println!("artifacts in {}", out.display());
    Ok(())
}
