//! Retrieval and verbalization on the three-entity graph D2 -> HBS -> KD.

use kgprompt::fixtures;
use kgprompt::retrieval::{collect_all_paths, extract_mentions, match_all, DEFAULT_THETA};
use kgprompt::verbalize::paths_to_knowledge_text;

fn main() -> anyhow::Result<()> {
    let g = fixtures::worked_example_graph();
    let text = "Patient with type 2 diabetes, now showing kidney disease";

    let mentions = extract_mentions(text, &g);
    let (matched, unmatched) = match_all(&mentions, &g, DEFAULT_THETA);
    for m in &matched {
        println!("{:?} -> {} ({:.2})", m.mention.surface, m.entity, m.score);
    }
    println!("unmatched: {}", unmatched.len());

    let sets = collect_all_paths(&g, &matched, 3);
    let knowledge = paths_to_knowledge_text(&sets, &g, 8)?;
    println!("knowledge: {}", knowledge.text);
    Ok(())
}
