//! Send one generation request to an OpenAI-compatible chat-completion server.
//!
//!     PROPAUG_API_KEY=... cargo run --example http_generation -- http://127.0.0.1:8000 local-llm
//!
//! The key is optional and only read from the environment.

use propaug::generator::{generate_batch, EndpointConfig, GenerationRequest, HttpGenerator};
use propaug::promptgen::{render, PromptSpec};
use propaug::taxonomy::{DisciplineNode, Taxonomy};

fn main() -> propaug::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(base_url) = args.next() else {
        eprintln!("usage: http_generation <base-url> [model]");
        std::process::exit(1);
    };
    let cfg = EndpointConfig {
        base_url,
        model_name: args.next().unwrap_or_else(|| EndpointConfig::default().model_name),
        max_retries: 2,
        ..EndpointConfig::default()
    };
    let backend = HttpGenerator::new(cfg).map_err(propaug::Error::Config)?;

    let t = Taxonomy::from_nodes([
        DisciplineNode::new("A", "Astronomy", None),
        DisciplineNode::new("A01", "History of Astronomy", Some("A")),
    ])?;
    let spec = PromptSpec::new("A01", t.name_path("A01")?, vec!["Astronomical Earth Survey".into()]);
    let prompt = render(&spec)?;
    let request = GenerationRequest {
        spec,
        prompt,
        target_class: "A01".into(),
        request_index: 0,
        seed: 7,
    };
    let outcome = generate_batch(&[request], &backend, &t).remove(0);
    match outcome.result {
        Ok(p) => println!("{}\n\n{}", p.title, p.abstract_text),
        Err(f) => println!("generation failed ({:?}): {}", f.kind, f.detail),
    }
    Ok(())
}
