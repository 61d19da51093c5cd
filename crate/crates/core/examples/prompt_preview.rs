//! Render the four-section generation prompt with and without keywords.
//!
//!     cargo run --example prompt_preview

use propaug::promptgen::{render, PromptSpec, Section};

fn main() -> propaug::Result<()> {
    let path = vec!["Astronomy".to_owned(), "History of Astronomy".to_owned()];
    let with = PromptSpec::new("A0301", path.clone(), vec!["Astronomical Earth Survey".into()]);
    let without = PromptSpec::new("A0301", path, vec![]);

    let prompt = render(&with)?;
    println!("{}", prompt.text);
    println!("spec hash {}", prompt.spec_hash);
    for section in Section::ORDER {
        let span = prompt.sections[&section];
        println!("  {:<24} bytes {}..{}", section.heading(), span.start, span.end);
    }

    let plain = render(&without)?;
    let removed: Vec<&str> = prompt
        .text
        .lines()
        .filter(|l| !plain.text.lines().any(|p| p == *l))
        .collect();
    println!("\nwithout keywords the prompt only loses: {removed:?}");
    Ok(())
}
