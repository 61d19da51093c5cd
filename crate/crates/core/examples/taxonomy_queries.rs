//! Build a small discipline taxonomy and query it.
//!
//!     cargo run --example taxonomy_queries

use propaug::taxonomy::{DisciplineNode, Taxonomy};

fn main() -> propaug::Result<()> {
    let t = Taxonomy::from_nodes([
        DisciplineNode::new("A", "Mathematical and Physical Sciences", None),
        DisciplineNode::new("A03", "Astronomy", Some("A")),
        DisciplineNode::new("A0301", "History of Astronomy", Some("A03")),
        DisciplineNode::new("A0302", "Astrometry", Some("A03")),
        DisciplineNode::new("C", "Life Sciences", None),
        DisciplineNode::new("C06", "Genetics", Some("C")),
    ])?;

    println!("{} nodes, depth {}, roots {:?}", t.len(), t.depth(), t.roots());
    println!("leaves: {:?}", t.leaves());
    for code in ["A0301", "A03", "C06"] {
        println!(
            "{code}: level {}, ancestors {:?}, path {}",
            t.level(code)?,
            t.ancestors(code)?,
            t.name_path(code)?.join(" > ")
        );
    }
    println!("closure of {{A0301, C06}} = {:?}", t.closure(["A0301", "C06"].iter())?);

    let mut jsonl = Vec::new();
    t.write_to(&mut jsonl).expect("write to memory");
    print!("\nas JSONL:\n{}", String::from_utf8_lossy(&jsonl));
    Ok(())
}
