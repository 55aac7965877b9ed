//! Model access behind one interface, plus the two model-backed signals the
//! reward layers need: the Monte-Carlo solver probe and the semantic judge.

mod remote;
mod scripted;

use std::sync::{Arc, LazyLock};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genreward::DifficultyBand;
use crate::parse::{parse_solver_completion, ToolCall, ToolSpec};
use crate::solreward::gold_value_oracle;
use crate::taskspec::{render_judge_prompt, render_solver_prompt, PromptBundle, TaskSpecError};

pub use remote::{RemoteBackend, RemoteConfig, ENDPOINT_ENV, TOKEN_ENV};
pub use scripted::{prompt_hash, ScriptedBackend, WILDCARD};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend error at {endpoint}: {message}")]
    Backend { endpoint: String, message: String },
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("probe error: {0}")]
    Probe(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] TaskSpecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: u32,
    pub params: DecodeParams,
    /// Index of the first requested sample within its logical batch. Scripted
    /// backends use it to pick transcript entries without shared state.
    #[serde(default)]
    pub sample_offset: u64,
}

/// A source of completions. Implementations must return exactly `req.n`
/// completions or an error.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, GatewayError>;

    /// Short label for logs and error messages.
    fn describe(&self) -> String;
}

impl<B: ModelBackend + ?Sized> ModelBackend for Arc<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        (**self).complete(req)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub max_in_flight: usize,
    pub probe: DecodeParams,
    pub rollout: DecodeParams,
    pub judge: DecodeParams,
    /// Extra judge attempts after an unparseable reply.
    pub judge_retries: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_in_flight: 8,
            probe: DecodeParams {
                temperature: 0.7,
                max_tokens: 2048,
            },
            rollout: DecodeParams {
                temperature: 1.0,
                max_tokens: 4096,
            },
            judge: DecodeParams {
                temperature: 0.0,
                max_tokens: 64,
            },
            judge_retries: 1,
        }
    }
}

/// A backend with a concurrency cap, the prompt templates, and the decode
/// settings for each kind of call.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ModelBackend>,
    pool: Arc<ThreadPool>,
    prompts: Arc<PromptBundle>,
    config: GatewayConfig,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.describe())
            .field("config", &self.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(
        backend: Arc<dyn ModelBackend>,
        prompts: Arc<PromptBundle>,
        config: GatewayConfig,
    ) -> Result<Self, GatewayError> {
        if config.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be at least 1".into()));
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(config.max_in_flight)
            .thread_name(|i| format!("gateway-{i}"))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            backend,
            pool: Arc::new(pool),
            prompts,
            config,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn prompts(&self) -> &PromptBundle {
        &self.prompts
    }

    pub fn backend(&self) -> &dyn ModelBackend {
        self.backend.as_ref()
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        if req.n == 0 {
            return Err(GatewayError::Config("n must be at least 1".into()));
        }
        let out = self.backend.complete(req)?;
        if out.len() != req.n as usize {
            return Err(GatewayError::Backend {
                endpoint: self.backend.describe(),
                message: format!("expected {} completions, got {}", req.n, out.len()),
            });
        }
        Ok(out)
    }

    /// Issues every request with at most `max_in_flight` running at once.
    /// Results line up with `reqs` regardless of completion order.
    pub fn complete_many(&self, reqs: &[CompletionRequest]) -> Vec<Result<Vec<String>, GatewayError>> {
        self.pool.install(|| reqs.par_iter().map(|r| self.complete(r)).collect())
    }

    /// Runs `f` over `items` inside the gateway pool, preserving order.
    pub fn map_parallel<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    /// One sample at rollout decode settings.
    pub fn rollout(&self, prompt: &str, sample_offset: u64) -> Result<String, GatewayError> {
        let req = CompletionRequest {
            prompt: prompt.to_string(),
            n: 1,
            params: self.config.rollout,
            sample_offset,
        };
        Ok(self.complete(&req)?.remove(0))
    }

    /// Draws `band.k_samples` solver answers at probe settings and counts
    /// strict-oracle matches with `gold`.
    pub fn probe_solver(
        &self,
        question: &str,
        menu: &[ToolSpec],
        gold: &[ToolCall],
        band: &DifficultyBand,
    ) -> Result<ProbeResult, GatewayError> {
        self.probe_solver_from(question, menu, gold, band.k_samples, 0)
    }

    /// `k` probe samples starting at sample slot `first_sample`, so a second
    /// batch for the same task can draw fresh slots.
    pub fn probe_solver_from(
        &self,
        question: &str,
        menu: &[ToolSpec],
        gold: &[ToolCall],
        k: u32,
        first_sample: u64,
    ) -> Result<ProbeResult, GatewayError> {
        if k == 0 {
            return Err(GatewayError::Probe("k must be at least 1".into()));
        }
        if gold.is_empty() {
            return Err(GatewayError::Probe("gold calls are empty".into()));
        }
        let prompt = render_solver_prompt(question, menu, &self.prompts)?;
        let reqs: Vec<CompletionRequest> = (0..u64::from(k))
            .map(|i| CompletionRequest {
                prompt: prompt.clone(),
                n: 1,
                params: self.config.probe,
                sample_offset: first_sample + i,
            })
            .collect();
        let results = self.complete_many(&reqs);
        if results.iter().all(Result::is_err) {
            let first = results.into_iter().find_map(Result::err).map(|e| e.to_string());
            return Err(GatewayError::Probe(format!(
                "all {k} samples failed: {}",
                first.unwrap_or_default()
            )));
        }
        let samples: Vec<ProbeSample> = results
            .into_iter()
            .map(|r| match r {
                Ok(mut texts) => ProbeSample::score(texts.remove(0), gold),
                Err(e) => ProbeSample {
                    completion: None,
                    calls: None,
                    error: Some(e.to_string()),
                    success: false,
                },
            })
            .collect();
        Ok(ProbeResult::from_samples(samples))
    }

    /// Asks the judge for a 1..=5 coherence score. Unparseable replies are
    /// retried; when every attempt fails the score floors at 1 and
    /// `parse_failed` is set.
    pub fn judge_semantics(
        &self,
        question: &str,
        menu: &[ToolSpec],
        gold: &[ToolCall],
    ) -> Result<JudgeOutcome, GatewayError> {
        let prompt = render_judge_prompt(question, menu, gold, &self.prompts)?;
        let mut replies = Vec::new();
        for attempt in 0..=self.config.judge_retries {
            let req = CompletionRequest {
                prompt: prompt.clone(),
                n: 1,
                params: self.config.judge,
                sample_offset: u64::from(attempt),
            };
            let reply = self.complete(&req)?.remove(0);
            let score = parse_judge_score(&reply);
            replies.push(reply);
            if let Some(score) = score {
                return Ok(JudgeOutcome {
                    score,
                    parse_failed: false,
                    replies,
                });
            }
        }
        tracing::warn!(attempts = replies.len(), "judge reply unparseable, using floor score");
        Ok(JudgeOutcome {
            score: 1,
            parse_failed: true,
            replies,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub completion: Option<String>,
    pub calls: Option<Vec<ToolCall>>,
    pub error: Option<String>,
    pub success: bool,
}

impl ProbeSample {
    pub fn score(completion: String, gold: &[ToolCall]) -> Self {
        let parsed = parse_solver_completion(&completion);
        let success = parsed.value.as_deref().is_some_and(|calls| gold_value_oracle(calls, gold));
        Self {
            error: parsed.value.is_none().then(|| parsed.diagnostics.join("; ")),
            calls: parsed.value,
            completion: Some(completion),
            success,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub samples: Vec<ProbeSample>,
    pub successes: u32,
    pub k: u32,
    pub p_succ: f64,
}

impl ProbeResult {
    pub fn from_samples(samples: Vec<ProbeSample>) -> Self {
        let k = samples.len() as u32;
        let successes = samples.iter().filter(|s| s.success).count() as u32;
        let p_succ = if k == 0 { 0.0 } else { f64::from(successes) / f64::from(k) };
        Self {
            samples,
            successes,
            k,
            p_succ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeOutcome {
    pub score: u8,
    pub parse_failed: bool,
    pub replies: Vec<String>,
}

static INTEGER_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("static regex"));

/// First standalone integer in 1..=5. Digits embedded in decimals or words
/// (`4.5`, `v2`) do not count.
pub fn parse_judge_score(reply: &str) -> Option<u8> {
    INTEGER_TOKEN.find_iter(reply).find_map(|m| {
        let before = reply[..m.start()].chars().next_back();
        let after = reply[m.end()..].chars().next();
        let glued = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        let decimal_next = reply[m.end()..].starts_with('.')
            && reply[m.end() + 1..].starts_with(|c: char| c.is_ascii_digit());
        let decimal_prev = before == Some('.')
            && reply[..m.start() - 1].ends_with(|c: char| c.is_ascii_digit());
        if glued(before) || glued(after) || decimal_next || decimal_prev {
            return None;
        }
        m.as_str().parse::<u8>().ok().filter(|s| (1..=5).contains(s))
    })
}
