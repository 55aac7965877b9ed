//! The iteration loop: per iteration, score generator rollouts, build the
//! dataset from a frozen solver, then score solver rollouts over that
//! dataset in curriculum order. Policy updates happen in an external trainer.
//!
//! Every step writes its artifact under `iter_<t>/` and then records the
//! artifact's hash in `state.json`. On restart, a step whose recorded hash
//! matches the file on disk is skipped, so an interrupted run finishes with
//! the same bytes as an uninterrupted one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::config::Config;
use crate::curate::{
    dataset_text, from_lines, generate_pool, parse_pool, select_and_order, to_lines, verify_candidates, Bucket,
    CurationError, CurationReport, CuratedRecord, PoolEntry,
};
use crate::gateway::Gateway;
use crate::service::{ItemContext, ItemResult, RewardItem, RewardOverrides, RewardRequest, RewardService, Role};
use crate::taskspec::render_generator_prompt;

#[derive(Debug, Error)]
pub enum SelfPlayError {
    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("phase {phase:?} of iteration {iteration} failed: {message}")]
    Phase { iteration: u32, phase: Phase, message: String },
    #[error("induced stop after step `{0}`")]
    Induced(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    GeneratorTraining,
    DatasetConstruction,
    SolverTraining,
}

/// Steps in execution order within one iteration.
pub const STEPS: [(Phase, &str); 6] = [
    (Phase::GeneratorTraining, "generator_rewards"),
    (Phase::DatasetConstruction, "pool"),
    (Phase::DatasetConstruction, "verified"),
    (Phase::DatasetConstruction, "dataset"),
    (Phase::SolverTraining, "solver_rewards"),
    (Phase::SolverTraining, "report"),
];

fn artifact_name(step: &str) -> &'static str {
    match step {
        "generator_rewards" => "generator_rewards.lines",
        "pool" => "pool.lines",
        "verified" => "verified.lines",
        "dataset" => "dataset.lines",
        "solver_rewards" => "solver_rewards.lines",
        "report" => "report.json",
        _ => unreachable!("unknown step {step}"),
    }
}

/// Checkpoint: where the loop is and the hash of every finished artifact,
/// keyed by path relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub iteration: u32,
    pub phase: Phase,
    pub artifacts: BTreeMap<String, String>,
    pub counters: BTreeMap<String, u64>,
}

impl Default for IterationState {
    fn default() -> Self {
        Self {
            iteration: 1,
            phase: Phase::GeneratorTraining,
            artifacts: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentMeans {
    pub count: usize,
    pub means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: u32,
    pub generator: ComponentMeans,
    pub solver: ComponentMeans,
    pub bucket_histogram: BTreeMap<Bucket, usize>,
    pub curation: CurationReport,
}

/// Means of every numeric breakdown field over the items that scored.
pub fn component_means(results: &[ItemResult]) -> ComponentMeans {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for r in results {
        if let serde_json::Value::Object(map) = canonical::to_value(&r.breakdown) {
            for (k, v) in map {
                if let Some(x) = v.as_f64() {
                    *sums.entry(k).or_default() += x;
                }
            }
        }
    }
    let n = results.len();
    ComponentMeans {
        count: n,
        means: sums
            .into_iter()
            .map(|(k, s)| (k, if n == 0 { 0.0 } else { s / n as f64 }))
            .collect(),
    }
}

pub struct Backends {
    pub generator: Gateway,
    pub solver: Gateway,
    pub judge: Gateway,
}

impl Backends {
    pub fn from_config(cfg: &Config) -> Result<Self, SelfPlayError> {
        let need = |g: Option<Gateway>, role: &str| {
            g.ok_or_else(|| SelfPlayError::Config(format!("gateway.{role} backend is required")))
        };
        let err = |e: crate::config::ConfigError| SelfPlayError::Config(e.to_string());
        Ok(Self {
            generator: need(cfg.generator_gateway().map_err(err)?, "generator")?,
            solver: need(cfg.solver_gateway().map_err(err)?, "solver")?,
            judge: need(cfg.judge_gateway().map_err(err)?, "judge")?,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop with an error right after this step of this iteration finishes.
    pub stop_after: Option<(u32, String)>,
}

/// Seed for iteration `t`, decorrelated from its neighbours.
pub fn iteration_seed(seed: u64, t: u32) -> u64 {
    seed ^ u64::from(t).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Run<'a> {
    cfg: &'a Config,
    backends: &'a Backends,
    out: PathBuf,
    state: IterationState,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SelfPlayError {
    SelfPlayError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl Run<'_> {
    fn state_path(&self) -> PathBuf {
        self.out.join("state.json")
    }

    fn save_state(&self) -> Result<(), SelfPlayError> {
        let path = self.state_path();
        std::fs::write(&path, canonical::to_string_pretty(&self.state) + "\n").map_err(|e| io_err(&path, e))
    }

    fn rel(t: u32, step: &str) -> String {
        format!("iter_{t}/{}", artifact_name(step))
    }

    /// Artifact text if the checkpoint vouches for the file on disk.
    fn cached(&self, t: u32, step: &str) -> Option<String> {
        let rel = Self::rel(t, step);
        let hash = self.state.artifacts.get(&rel)?;
        let text = std::fs::read_to_string(self.out.join(&rel)).ok()?;
        (canonical::sha256_hex(&text) == *hash).then_some(text)
    }

    fn commit(&mut self, t: u32, phase: Phase, step: &str, text: &str) -> Result<(), SelfPlayError> {
        let rel = Self::rel(t, step);
        let path = self.out.join(&rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.state.iteration = t;
        self.state.phase = phase;
        self.state.artifacts.insert(rel, canonical::sha256_hex(text));
        self.save_state()
    }

    /// Returns the step's artifact, computing and committing it if needed.
    fn step(
        &mut self,
        t: u32,
        phase: Phase,
        step: &str,
        opts: &RunOptions,
        compute: impl FnOnce(&mut Self) -> Result<String, String>,
    ) -> Result<String, SelfPlayError> {
        if let Some(text) = self.cached(t, step) {
            return Ok(text);
        }
        let text = compute(self).map_err(|message| SelfPlayError::Phase {
            iteration: t,
            phase,
            message,
        })?;
        self.commit(t, phase, step, &text)?;
        if opts.stop_after.as_ref().is_some_and(|(it, s)| *it == t && s == step) {
            return Err(SelfPlayError::Induced(step.to_string()));
        }
        Ok(text)
    }
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, String> {
    from_lines(text).map_err(|e: CurationError| e.to_string())
}

fn reward_service(cfg: &Config, b: &Backends) -> RewardService {
    RewardService {
        generator: cfg.generator_reward,
        solver: cfg.solver_reward,
        solver_gateway: Some(b.solver.clone()),
        judge_gateway: Some(b.judge.clone()),
    }
}

/// Runs iterations `1..=cfg.selfplay.iterations` into `out_dir`, resuming
/// from `state.json` if present. Returns one report per iteration.
pub fn run_selfplay(
    cfg: &Config,
    backends: &Backends,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<Vec<IterationReport>, SelfPlayError> {
    let iterations = cfg.selfplay.iterations;
    if iterations == 0 {
        return Ok(Vec::new());
    }
    cfg.validate().map_err(|e| SelfPlayError::Config(e.to_string()))?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let state_path = out_dir.join("state.json");
    let state = match std::fs::read_to_string(&state_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| io_err(&state_path, e))?,
        Err(_) => IterationState::default(),
    };
    let mut run = Run {
        cfg,
        backends,
        out: out_dir.to_path_buf(),
        state,
    };
    let service = reward_service(cfg, backends);
    let mut reports = Vec::new();

    for t in 1..=iterations {
        let seed = iteration_seed(cfg.seed, t);

        // (a) score a batch of generator rollouts
        let gen_text = run.step(t, Phase::GeneratorTraining, "generator_rewards", opts, |r| {
            let sampler = r.cfg.taskspec.sampler().map_err(|e| e.to_string())?;
            let gen = &r.backends.generator;
            let items: Vec<RewardItem> = (0..r.cfg.selfplay.generator_batch as u64)
                .map(|i| {
                    let spec = sampler.draw(seed, i);
                    let prompt = render_generator_prompt(&spec, gen.prompts()).map_err(|e| e.to_string())?;
                    Ok(RewardItem {
                        completion: gen.rollout(&prompt, i).map_err(|e| e.to_string())?,
                        context: ItemContext {
                            spec: Some(spec),
                            ..ItemContext::default()
                        },
                    })
                })
                .collect::<Result<_, String>>()?;
            if items.is_empty() {
                return Ok(String::new());
            }
            let resp = service
                .score_batch(&RewardRequest {
                    role: Role::Generator,
                    items,
                    overrides: RewardOverrides::default(),
                })
                .map_err(|e| e.to_string())?;
            Ok(to_lines(&resp.results))
        })?;

        // (b) dataset construction against the frozen solver
        let pool_text = run.step(t, Phase::DatasetConstruction, "pool", opts, |r| {
            let pool = generate_pool(&r.cfg.taskspec, &r.backends.generator, seed, r.cfg.curation.pool_size)
                .map_err(|e| e.to_string())?;
            Ok(to_lines(&pool))
        })?;
        let mut curation = CurationReport::default();
        let pool: Vec<PoolEntry> = parse_lines(&pool_text).map_err(|message| SelfPlayError::Phase {
            iteration: t,
            phase: Phase::DatasetConstruction,
            message,
        })?;
        let candidates = parse_pool(&pool, &mut curation);
        let verified_text = run.step(t, Phase::DatasetConstruction, "verified", opts, |r| {
            let mut scratch = CurationReport::default();
            let verified = verify_candidates(&candidates, &r.backends.solver, &r.cfg.curation, &mut scratch);
            Ok(to_lines(&verified))
        })?;
        let verified: Vec<CuratedRecord> = parse_lines(&verified_text).map_err(|message| SelfPlayError::Phase {
            iteration: t,
            phase: Phase::DatasetConstruction,
            message,
        })?;
        curation.verified = verified.len();
        for b in Bucket::ALL {
            curation
                .verified_buckets
                .insert(b, verified.iter().filter(|r| r.bucket == b).count());
        }
        let (records, selection) =
            select_and_order(&verified, &cfg.curation, seed).map_err(|e| SelfPlayError::Phase {
                iteration: t,
                phase: Phase::DatasetConstruction,
                message: e.to_string(),
            })?;
        curation.selection = selection;
        let dataset = dataset_text(&records);
        run.step(t, Phase::DatasetConstruction, "dataset", opts, |_| Ok(dataset.clone()))?;

        // (c) solver rollouts over the dataset, in curriculum order
        let solver_text = run.step(t, Phase::SolverTraining, "solver_rewards", opts, |r| {
            let sol = &r.backends.solver;
            let items: Vec<RewardItem> = records
                .iter()
                .map(|rec| {
                    let prompt = crate::taskspec::render_solver_prompt(&rec.task.question, &rec.task.tools, sol.prompts())
                        .map_err(|e| e.to_string())?;
                    Ok(RewardItem {
                        completion: sol.rollout(&prompt, rec.curriculum_rank as u64).map_err(|e| e.to_string())?,
                        context: ItemContext {
                            gold_calls: Some(rec.task.gold_calls.clone()),
                            ..ItemContext::default()
                        },
                    })
                })
                .collect::<Result<_, String>>()?;
            if items.is_empty() {
                return Ok(String::new());
            }
            let resp = service
                .score_batch(&RewardRequest {
                    role: Role::Solver,
                    items,
                    overrides: RewardOverrides::default(),
                })
                .map_err(|e| e.to_string())?;
            Ok(to_lines(&resp.results))
        })?;

        let gen_results: Vec<ItemResult> = parse_lines(&gen_text).map_err(|message| SelfPlayError::Phase {
            iteration: t,
            phase: Phase::SolverTraining,
            message,
        })?;
        let solver_results: Vec<ItemResult> = parse_lines(&solver_text).map_err(|message| SelfPlayError::Phase {
            iteration: t,
            phase: Phase::SolverTraining,
            message,
        })?;
        let report = IterationReport {
            iteration: t,
            generator: component_means(&gen_results),
            solver: component_means(&solver_results),
            bucket_histogram: Bucket::ALL
                .iter()
                .map(|&b| (b, records.iter().filter(|r| r.bucket == b).count()))
                .collect(),
            curation,
        };
        run.step(t, Phase::SolverTraining, "report", opts, |_| {
            Ok(canonical::to_string_pretty(&report) + "\n")
        })?;
        run.state.counters.insert("iterations_completed".into(), u64::from(t));
        run.save_state()?;
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iterations_is_a_noop() {
        let cfg = Config {
            selfplay: crate::config::SelfPlaySection {
                iterations: 0,
                ..Default::default()
            },
            ..Config::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let gw = || {
            Gateway::new(
                std::sync::Arc::new(crate::gateway::ScriptedBackend::constant(vec!["x".into()]).unwrap()),
                Default::default(),
                Default::default(),
            )
            .unwrap()
        };
        let b = Backends {
            generator: gw(),
            solver: gw(),
            judge: gw(),
        };
        let out = dir.path().join("run");
        assert!(run_selfplay(&cfg, &b, &out, &RunOptions::default()).unwrap().is_empty());
        assert!(!out.exists());
    }

    #[test]
    fn means_recompute() {
        let r = |x: f64| ItemResult {
            index: 0,
            ok: true,
            breakdown: crate::service::RewardBreakdown::Solver(crate::solreward::SolverRewardBreakdown {
                fmt: x,
                acc: x,
                base_accuracy: x,
                penalty_factor: 1.0,
                total_raw: 2.0 * x,
                total_normalized: x,
            }),
            diagnostics: vec![],
            probe_successes: None,
            judge_parse_failed: None,
        };
        let m = component_means(&[r(1.0), r(0.0)]);
        assert_eq!(m.means["fmt"], 0.5);
        assert_eq!(m.means["total_raw"], 1.0);
    }
}
