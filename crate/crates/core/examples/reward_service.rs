//! Starts the reward service on a free port over scripted backends and
//! scores a mixed solver batch and a generator batch over HTTP.
//!
//!     cargo run --example reward_service

use std::sync::Arc;

use serde_json::{json, Value};
use toolplay::gateway::GatewayConfig;
use toolplay::service::{spawn_server, RewardService};
use toolplay::taskspec::{PromptBundle, SpecDistribution};
use toolplay::world::{solver_answer, wrong_answer, ScriptedWorld};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prompts = Arc::new(PromptBundle::default());
    let world = ScriptedWorld::build(&SpecDistribution::default(), 5, 10, &prompts)?;
    let b = world.backends(prompts, GatewayConfig::default())?;
    let service = RewardService {
        solver_gateway: Some(b.solver),
        judge_gateway: Some(b.judge),
        ..RewardService::default()
    };
    let server = spawn_server(Arc::new(service), "127.0.0.1:0".parse()?)?;
    println!("serving on {}", server.url(""));
    let client = reqwest::blocking::Client::new();

    let task = world.entries[0].task.as_ref().expect("draw 0 parses");
    let gold = &task.gold_calls;
    let solver_batch = json!({"items": [
        {"completion": solver_answer(gold), "context": {"gold_calls": gold}},
        {"completion": solver_answer(&wrong_answer(gold)), "context": {"gold_calls": gold}},
        {"completion": "", "context": {"gold_calls": gold}},
    ]});
    let resp: Value = client.post(server.url("/v1/rewards/solver")).json(&solver_batch).send()?.json()?;
    for r in resp["results"].as_array().unwrap() {
        println!("solver item {} ok {} breakdown {}", r["index"], r["ok"], r["breakdown"]);
    }

    let generator_batch = json!({"items": world.entries.iter().take(4)
        .map(|e| json!({"completion": e.completion, "context": {"spec": e.spec}}))
        .collect::<Vec<_>>()});
    let resp: Value = client.post(server.url("/v1/rewards/generator")).json(&generator_batch).send()?.json()?;
    for r in resp["results"].as_array().unwrap() {
        println!(
            "generator item {} probe {} diff {} total {}",
            r["index"], r["probe_successes"], r["breakdown"]["diff"], r["breakdown"]["total_raw"]
        );
    }

    let health: Value = client.get(server.url("/v1/health")).send()?.json()?;
    println!("health {health}");
    server.stop();
    Ok(())
}
