//! A deterministic scripted world: generator, solver and judge transcripts
//! keyed by prompt hash, so the whole pipeline runs offline. Used by the
//! examples, the CLI tests and the acceptance suite.
//!
//! Draw `i` of the pool gets a synthetic task whose solver answers succeed
//! on a known number of the eight probe slots. Every 11th draw emits one
//! shared task and every 17th is unparseable, so dedup and the parse filter
//! have work to do. Completions depend only on the spec and the draw index,
//! so worlds built for several seeds merge without conflicting slots.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use crate::canonical;
use crate::gateway::{prompt_hash, Gateway, GatewayConfig, GatewayError, ScriptedBackend};
use crate::parse::{GeneratedTask, ParamSpec, ToolCall, ToolSpec};
use crate::selfplay::{iteration_seed, Backends};
use crate::taskspec::{render_generator_prompt, render_solver_prompt, PromptBundle, SpecDistribution, TaskSpec, TaskSpecError};

/// Probe slots scripted per task.
pub const SLOTS: u32 = 8;

pub const JUDGE_REPLY: &str = "4";

#[derive(Debug, Clone, PartialEq)]
pub struct WorldEntry {
    pub index: u64,
    pub spec: TaskSpec,
    pub completion: String,
    /// None for the deliberately unparseable draws.
    pub task: Option<GeneratedTask>,
    /// Correct answers among the scripted solver slots.
    pub successes: u32,
}

#[derive(Debug, Clone)]
pub struct ScriptedWorld {
    pub entries: Vec<WorldEntry>,
    pub generator: BTreeMap<String, Vec<String>>,
    pub solver: BTreeMap<String, Vec<String>>,
    pub judge: BTreeMap<String, Vec<String>>,
}

fn slug(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    out.truncate(24);
    out
}

/// Successes out of [`SLOTS`] for draw `i`; cycles through 0..=8 out of
/// phase with the duplicate and garbage cadences.
pub fn successes_for(i: u64) -> u32 {
    ((i * 7 + 3) % u64::from(SLOTS + 1)) as u32
}

pub fn synthetic_task(i: u64, spec: &TaskSpec) -> GeneratedTask {
    let menu_size = spec.tool_menu_size.max(1);
    let base = slug(&spec.domain);
    let tools: Vec<ToolSpec> = (0..menu_size)
        .map(|j| ToolSpec {
            name: format!("{base}_op{j}"),
            description: format!("Operation {j} for {}", spec.domain),
            parameters: BTreeMap::from([
                (
                    "query".to_string(),
                    ParamSpec {
                        kind: "string".into(),
                        description: "what to look up".into(),
                    },
                ),
                (
                    "count".to_string(),
                    ParamSpec {
                        kind: "integer".into(),
                        description: "how many results".into(),
                    },
                ),
            ]),
            required: vec!["query".into()],
        })
        .collect();
    let mut parts = Vec::new();
    let mut gold_calls = Vec::new();
    for c in 0..u64::from(spec.num_gold_calls.max(1)) {
        let tool = &tools[(c % u64::from(menu_size)) as usize];
        let query = format!("item{i}x{c}");
        let count = i % 5 + 1 + c;
        parts.push(format!("look up {query} and return {count} results"));
        gold_calls.push(ToolCall::from_json(&tool.name, json!({"query": query, "count": count})));
    }
    let question = format!("In {}, please {}.", spec.domain, parts.join(", then "));
    GeneratedTask {
        think: format!("draft {i}"),
        question,
        tools,
        gold_calls,
        raw: String::new(),
    }
}

pub fn render_completion(task: &GeneratedTask) -> String {
    format!(
        "<think>{}</think>\n<question>{}</question>\n<available_tools>{}</available_tools>\n<tool_call_answer>{}</tool_call_answer>",
        task.think,
        task.question,
        canonical::to_string(&task.tools),
        canonical::to_string(&task.gold_calls)
    )
}

pub fn solver_answer(calls: &[ToolCall]) -> String {
    format!("<think>ok</think>\n<tool_call_answer>{}</tool_call_answer>", canonical::to_string(calls))
}

/// Gold with the first call's query replaced, so the strict oracle fails.
pub fn wrong_answer(gold: &[ToolCall]) -> Vec<ToolCall> {
    let mut calls = gold.to_vec();
    if let Some(first) = calls.first_mut() {
        first.arguments.insert("query".into(), json!("something else"));
    }
    calls
}

/// The task every 11th draw emits, whatever its spec.
pub fn shared_task() -> GeneratedTask {
    let spec = TaskSpec {
        domain: "shared".into(),
        context_type: crate::taskspec::ContextType::SingleTurn,
        tool_menu_size: 2,
        num_gold_calls: 1,
    };
    synthetic_task(0, &spec)
}

impl ScriptedWorld {
    pub fn build(
        dist: &SpecDistribution,
        seed: u64,
        pool_size: usize,
        prompts: &PromptBundle,
    ) -> Result<Self, TaskSpecError> {
        Self::build_many(dist, &[seed], pool_size, prompts)
    }

    /// Covers every iteration of a self-play run seeded with `seed`.
    pub fn for_selfplay(
        dist: &SpecDistribution,
        seed: u64,
        iterations: u32,
        pool_size: usize,
        prompts: &PromptBundle,
    ) -> Result<Self, TaskSpecError> {
        let seeds: Vec<u64> = (1..=iterations).map(|t| iteration_seed(seed, t)).collect();
        Self::build_many(dist, &seeds, pool_size, prompts)
    }

    /// Entries for every seed, in seed order.
    pub fn build_many(
        dist: &SpecDistribution,
        seeds: &[u64],
        pool_size: usize,
        prompts: &PromptBundle,
    ) -> Result<Self, TaskSpecError> {
        let sampler = dist.sampler()?;
        let mut entries: Vec<WorldEntry> = Vec::with_capacity(pool_size * seeds.len());
        for &seed in seeds {
            for i in 0..pool_size as u64 {
                let spec = sampler.draw(seed, i);
                let (task, successes) = if i % 17 == 16 {
                    (None, 0)
                } else if i % 11 == 10 {
                    (Some(shared_task()), SLOTS)
                } else {
                    (Some(synthetic_task(i, &spec)), successes_for(i))
                };
                let completion = match &task {
                    Some(t) => render_completion(t),
                    None => format!("I could not think of a task ({i})."),
                };
                entries.push(WorldEntry {
                    index: i,
                    spec,
                    completion,
                    task,
                    successes,
                });
            }
        }

        let mut generator: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in &entries {
            let key = prompt_hash(&render_generator_prompt(&e.spec, prompts)?);
            let slots = generator
                .entry(key)
                .or_insert_with(|| vec!["(unused slot)".to_string(); pool_size]);
            slots[e.index as usize] = e.completion.clone();
        }

        let mut solver = BTreeMap::new();
        for e in &entries {
            let Some(task) = &e.task else { continue };
            let key = prompt_hash(&render_solver_prompt(&task.question, &task.tools, prompts)?);
            let right = solver_answer(&task.gold_calls);
            let wrong = solver_answer(&wrong_answer(&task.gold_calls));
            let slots = (0..SLOTS)
                .map(|s| if s < e.successes { right.clone() } else { wrong.clone() })
                .collect();
            solver.entry(key).or_insert(slots);
        }

        let judge = BTreeMap::from([(crate::gateway::WILDCARD.to_string(), vec![JUDGE_REPLY.to_string()])]);
        Ok(Self {
            entries,
            generator,
            solver,
            judge,
        })
    }

    /// Gateways over fresh scripted backends.
    pub fn backends(&self, prompts: Arc<PromptBundle>, cfg: GatewayConfig) -> Result<Backends, GatewayError> {
        let gw = |table: &BTreeMap<String, Vec<String>>| -> Result<Gateway, GatewayError> {
            Gateway::new(Arc::new(ScriptedBackend::new(table.clone())?), prompts.clone(), cfg)
        };
        Ok(Backends {
            generator: gw(&self.generator)?,
            solver: gw(&self.solver)?,
            judge: gw(&self.judge)?,
        })
    }

    /// Writes `generator/`, `solver/` and `judge/` fixture directories.
    pub fn write_fixtures(&self, dir: &Path) -> std::io::Result<()> {
        for (name, table) in [("generator", &self.generator), ("solver", &self.solver), ("judge", &self.judge)] {
            ScriptedBackend::write_fixture(table, &dir.join(name), "transcripts")?;
        }
        Ok(())
    }

    /// Config text pointing every role at the fixtures written by
    /// [`write_fixtures`](Self::write_fixtures) into the same directory.
    pub fn config_toml(seed: u64, pool_size: usize, output_size: usize, extra: &str) -> String {
        format!(
            "seed = {seed}\n{extra}\n[curation]\npool_size = {pool_size}\noutput_size = {output_size}\nagreement_threshold = 0.125\n\n[gateway.generator]\nkind = \"scripted\"\nfixtures = \"generator\"\n\n[gateway.solver]\nkind = \"scripted\"\nfixtures = \"solver\"\n\n[gateway.judge]\nkind = \"scripted\"\nfixtures = \"judge\"\n"
        )
    }
}
