//! Classifies a few texts with the synthetic suite and prints explanations.

use std::sync::Arc;

use kgprompt::{fixtures, RunConfig};

fn main() -> anyhow::Result<()> {
    let cfg = RunConfig::load(fixtures::synthetic_config_path())?;
    let pipeline = cfg.build_pipeline(Arc::new(cfg.load_graph()?))?;
    let texts = [
        "Known T2DM presenting with polyuria",
        "CKD with proteinuria on the latest panel",
        "CHF admitted for dyspnea",
    ];
    for (i, text) in texts.iter().enumerate() {
        let c = pipeline.classify(&format!("ex-{i}"), text)?;
        println!("{}", c.explanation.render());
    }
    Ok(())
}
