//! Builds a scripted world, synthesizes a 200-candidate pool, and curates it
//! into a 50-record curriculum-ordered dataset.
//!
//!     cargo run --example curate_dataset

use std::sync::Arc;

use toolplay::curate::{curate_pool, dataset_text, generate_pool, segment_bounds, segment_means, CurationConfig};
use toolplay::gateway::GatewayConfig;
use toolplay::taskspec::{PromptBundle, SpecDistribution};
use toolplay::world::ScriptedWorld;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 7;
    let dist = SpecDistribution::default();
    let prompts = Arc::new(PromptBundle::default());
    let world = ScriptedWorld::build(&dist, seed, 200, &prompts)?;
    let backends = world.backends(prompts, GatewayConfig::default())?;

    let pool = generate_pool(&dist, &backends.generator, seed, 200)?;
    let cfg = CurationConfig {
        pool_size: 200,
        output_size: 50,
        agreement_threshold: 0.125,
        ..CurationConfig::default()
    };
    let (records, report) = curate_pool(&pool, &backends.solver, &cfg, seed)?;

    println!(
        "pool {} unparsed {} duplicates {} below agreement {} verified {}",
        report.pool, report.unparsed, report.duplicates, report.below_agreement, report.verified
    );
    println!("bucket targets {:?} counts {:?}", report.selection.bucket_targets, report.selection.bucket_counts);
    for w in &report.selection.warnings {
        println!("warning: {w}");
    }
    let bounds = segment_bounds(records.len());
    for (i, mean) in segment_means(&records).iter().enumerate() {
        println!("segment of {} records, mean p_pass {mean:.3}", bounds[i + 1] - bounds[i]);
    }
    let text = dataset_text(&records);
    println!("dataset sha256 {}", toolplay::canonical::sha256_hex(&text));
    println!("{}", text.lines().next().unwrap_or_default());
    Ok(())
}
