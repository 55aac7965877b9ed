//! Probes a scripted solver on generated tasks, judges them, and turns the
//! outcomes into difficulty and curriculum rewards.
//!
//!     cargo run --example difficulty_probe

use std::sync::Arc;

use toolplay::gateway::GatewayConfig;
use toolplay::genreward::{curriculum_reward, difficulty_reward, semantic_reward, DifficultyBand};
use toolplay::taskspec::{PromptBundle, SpecDistribution};
use toolplay::world::ScriptedWorld;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prompts = Arc::new(PromptBundle::default());
    let world = ScriptedWorld::build(&SpecDistribution::default(), 3, 12, &prompts)?;
    let b = world.backends(prompts, GatewayConfig::default())?;
    let band = DifficultyBand::default();

    for e in world.entries.iter().filter(|e| e.task.is_some()) {
        let task = e.task.as_ref().unwrap();
        let probe = b.solver.probe_solver(&task.question, &task.tools, &task.gold_calls, &band)?;
        let judged = b.judge.judge_semantics(&task.question, &task.tools, &task.gold_calls)?;
        let diff = difficulty_reward(probe.p_succ, &band);
        let sem = semantic_reward(judged.score)?;
        println!(
            "draw {:>2} {:<28} pass {}/{} diff {diff:.3} judge {} curr {:.3}",
            e.index,
            e.spec.domain,
            probe.successes,
            probe.k,
            judged.score,
            curriculum_reward(diff, sem)
        );
    }
    Ok(())
}
