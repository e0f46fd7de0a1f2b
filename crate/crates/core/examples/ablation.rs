//! Runs all eight ablation variants on the synthetic suite.

use std::sync::Arc;

use kgprompt::eval::{run_ablation, AblationConfig, EvalOptions};
use kgprompt::{fixtures, RunConfig};

fn main() -> anyhow::Result<()> {
    let cfg = RunConfig::load(fixtures::synthetic_config_path())?;
    let graph = Arc::new(cfg.load_graph()?);
    let ds = fixtures::synthetic_dataset();
    let (report, _) = run_ablation(&cfg, graph, &ds, &AblationConfig::all(), &EvalOptions { repeats: 1, jobs: 4 })?;
    print!("{}", report.to_tsv());
    Ok(())
}
