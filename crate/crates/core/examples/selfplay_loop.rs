//! Runs two scripted self-play iterations into a temporary directory, then
//! reruns to show that finished steps are reused from the checkpoint.
//!
//!     cargo run --example selfplay_loop

use std::sync::Arc;

use toolplay::config::Config;
use toolplay::gateway::GatewayConfig;
use toolplay::selfplay::{run_selfplay, RunOptions};
use toolplay::taskspec::{PromptBundle, SpecDistribution};
use toolplay::world::ScriptedWorld;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (seed, pool, output) = (7, 120, 30);
    let cfg = Config::from_toml(&ScriptedWorld::config_toml(
        seed,
        pool,
        output,
        "[selfplay]\niterations = 2\ngenerator_batch = 12\n",
    ))?;
    let prompts = Arc::new(PromptBundle::default());
    let world = ScriptedWorld::for_selfplay(&SpecDistribution::default(), seed, 2, pool, &prompts)?;
    let backends = world.backends(prompts, GatewayConfig::default())?;

    let dir = tempfile::tempdir()?;
    let reports = run_selfplay(&cfg, &backends, dir.path(), &RunOptions::default())?;
    for r in &reports {
        println!(
            "iteration {}: generator mean {:.3} over {}, verified {}, dataset {}, solver mean {:.3}, buckets {:?}",
            r.iteration,
            r.generator.means.get("total_normalized").copied().unwrap_or_default(),
            r.generator.count,
            r.curation.verified,
            r.curation.selection.selected,
            r.solver.means.get("total_normalized").copied().unwrap_or_default(),
            r.bucket_histogram
        );
    }
    let again = run_selfplay(&cfg, &backends, dir.path(), &RunOptions::default())?;
    println!("rerun reproduced the reports: {}", again == reports);
    println!("state: {}", std::fs::read_to_string(dir.path().join("state.json"))?);
    Ok(())
}
