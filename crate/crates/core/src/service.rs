//! Batch reward scoring for external trainers, offline or over HTTP.
//!
//! `POST /v1/rewards/generator` and `POST /v1/rewards/solver` take
//! `{"items": [{"completion": .., "context": {..}}], "overrides": {..}}` and
//! return one result per item in request order. `GET /v1/health` reports
//! liveness. A bad item never fails the batch: it gets a zero-total
//! breakdown and diagnostics.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::canonical;
use crate::gateway::Gateway;
use crate::genreward::{score_generator, CurriculumInputs, GenRewardBreakdown, GenRewardConfig};
use crate::parse::{parse_generator_completion, ToolCall, ToolSpec};
use crate::solreward::{score_solver_completion, SolverRewardBreakdown, SolverRewardConfig};
use crate::taskspec::TaskSpec;

#[derive(Debug, Error)]
pub enum RequestError {
    #[error("malformed request: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Generator,
    Solver,
}

/// Per-item context. Solver items need `gold_calls`. Generator items may
/// pin `p_succ` and `judge_score`; otherwise the service probes and judges
/// through its configured backends.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<TaskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tools: Option<Vec<ToolSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_calls: Option<Vec<ToolCall>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_succ: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_score: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardItem {
    pub completion: String,
    #[serde(default)]
    pub context: ItemContext,
}

/// Reward configs that replace the service's for one request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenRewardConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverRewardConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub role: Role,
    pub items: Vec<RewardItem>,
    #[serde(default)]
    pub overrides: RewardOverrides,
}

/// Request body for the role-specific endpoints, where the path fixes the role.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointBody {
    #[serde(default)]
    role: Option<Role>,
    items: Vec<RewardItem>,
    #[serde(default)]
    overrides: RewardOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardBreakdown {
    Generator(GenRewardBreakdown),
    Solver(SolverRewardBreakdown),
}

impl RewardBreakdown {
    pub fn total_raw(&self) -> f64 {
        match self {
            RewardBreakdown::Generator(b) => b.total_raw,
            RewardBreakdown::Solver(b) => b.total_raw,
        }
    }

    pub fn total_normalized(&self) -> f64 {
        match self {
            RewardBreakdown::Generator(b) => b.total_normalized,
            RewardBreakdown::Solver(b) => b.total_normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub index: usize,
    /// False when the item could not be scored and got the zero breakdown.
    pub ok: bool,
    pub breakdown: RewardBreakdown,
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_successes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_parse_failed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardResponse {
    pub role: Role,
    pub results: Vec<ItemResult>,
}

/// Stateless scorer: reward configs plus optional backends for probing the
/// solver and judging semantics.
#[derive(Debug, Clone, Default)]
pub struct RewardService {
    pub generator: GenRewardConfig,
    pub solver: SolverRewardConfig,
    pub solver_gateway: Option<Gateway>,
    pub judge_gateway: Option<Gateway>,
}

impl RewardService {
    pub fn score_batch(&self, req: &RewardRequest) -> Result<RewardResponse, RequestError> {
        if req.items.is_empty() {
            return Err(RequestError::Malformed("items must be non-empty".into()));
        }
        let gen_cfg = req.overrides.generator.unwrap_or(self.generator);
        gen_cfg
            .validate()
            .map_err(|e| RequestError::Malformed(format!("generator overrides: {e}")))?;
        let sol_cfg = req.overrides.solver.unwrap_or(self.solver);
        let results = req
            .items
            .par_iter()
            .enumerate()
            .map(|(index, item)| match req.role {
                Role::Generator => self.score_generator_item(index, item, &gen_cfg),
                Role::Solver => score_solver_item(index, item, &sol_cfg),
            })
            .collect();
        Ok(RewardResponse { role: req.role, results })
    }

    fn score_generator_item(&self, index: usize, item: &RewardItem, cfg: &GenRewardConfig) -> ItemResult {
        let parsed = parse_generator_completion(&item.completion);
        let mut diagnostics = parsed.outcome.diagnostics.clone();
        let mut probe_successes = None;
        let mut judge_parse_failed = None;
        let fault = |mut diagnostics: Vec<String>, msg: String| {
            diagnostics.push(msg);
            ItemResult {
                index,
                ok: false,
                breakdown: RewardBreakdown::Generator(GenRewardBreakdown::zero()),
                diagnostics,
                probe_successes: None,
                judge_parse_failed: None,
            }
        };
        if item.completion.trim().is_empty() {
            return fault(diagnostics, "empty completion".into());
        }
        let curriculum = match parsed.task() {
            None => None,
            Some(task) => {
                let p_succ = match (item.context.p_succ, &self.solver_gateway) {
                    (Some(p), _) => p,
                    (None, Some(gw)) => match gw.probe_solver(&task.question, &task.tools, &task.gold_calls, &cfg.band) {
                        Ok(probe) => {
                            probe_successes = Some(probe.successes);
                            probe.p_succ
                        }
                        Err(e) => return fault(diagnostics, e.to_string()),
                    },
                    (None, None) => {
                        return fault(diagnostics, "no p_succ in context and no solver backend configured".into())
                    }
                };
                let judge_score = match (item.context.judge_score, &self.judge_gateway) {
                    (Some(s), _) => s,
                    (None, Some(gw)) => match gw.judge_semantics(&task.question, &task.tools, &task.gold_calls) {
                        Ok(j) => {
                            judge_parse_failed = Some(j.parse_failed);
                            if j.parse_failed {
                                diagnostics.push("judge reply unparseable; floor score used".into());
                            }
                            j.score
                        }
                        Err(e) => return fault(diagnostics, e.to_string()),
                    },
                    (None, None) => {
                        return fault(diagnostics, "no judge_score in context and no judge backend configured".into())
                    }
                };
                Some(CurriculumInputs { p_succ, judge_score })
            }
        };
        match score_generator(&parsed, curriculum, cfg) {
            Ok(b) => ItemResult {
                index,
                ok: true,
                breakdown: RewardBreakdown::Generator(b),
                diagnostics,
                probe_successes,
                judge_parse_failed,
            },
            Err(e) => fault(diagnostics, e.to_string()),
        }
    }
}

pub fn score_solver_item(index: usize, item: &RewardItem, cfg: &SolverRewardConfig) -> ItemResult {
    let zero = |diagnostics: Vec<String>| ItemResult {
        index,
        ok: false,
        breakdown: RewardBreakdown::Solver(SolverRewardBreakdown::zero()),
        diagnostics,
        probe_successes: None,
        judge_parse_failed: None,
    };
    let Some(gold) = item.context.gold_calls.as_deref().filter(|g| !g.is_empty()) else {
        return zero(vec!["context.gold_calls is missing or empty".into()]);
    };
    if item.completion.trim().is_empty() {
        return zero(vec!["empty completion".into()]);
    }
    let (breakdown, parsed) = score_solver_completion(&item.completion, gold, cfg);
    ItemResult {
        index,
        ok: true,
        breakdown: RewardBreakdown::Solver(breakdown),
        diagnostics: parsed.diagnostics,
        probe_successes: None,
        judge_parse_failed: None,
    }
}

/// Parses an endpoint body for `role`. A `role` field, if present, must agree.
pub fn parse_endpoint_body(role: Role, body: &[u8]) -> Result<RewardRequest, RequestError> {
    let parsed: EndpointBody = serde_json::from_slice(body).map_err(|e| RequestError::Malformed(e.to_string()))?;
    if parsed.role.is_some_and(|r| r != role) {
        return Err(RequestError::Malformed("role in body does not match endpoint".into()));
    }
    Ok(RewardRequest {
        role,
        items: parsed.items,
        overrides: parsed.overrides,
    })
}

struct AppState {
    service: Arc<RewardService>,
    in_flight: AtomicUsize,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn score_endpoint(state: Arc<AppState>, role: Role, body: Bytes) -> Response {
    let req = match parse_endpoint_body(role, &body) {
        Ok(r) => r,
        Err(e) => return json_response(StatusCode::BAD_REQUEST, canonical::to_string(&json!({"error": e.to_string()}))),
    };
    state.in_flight.fetch_add(1, Ordering::SeqCst);
    let service = state.service.clone();
    let result = tokio::task::spawn_blocking(move || service.score_batch(&req)).await;
    state.in_flight.fetch_sub(1, Ordering::SeqCst);
    match result {
        Ok(Ok(resp)) => json_response(StatusCode::OK, canonical::to_string(&resp)),
        Ok(Err(e)) => json_response(StatusCode::BAD_REQUEST, canonical::to_string(&json!({"error": e.to_string()}))),
        Err(e) => json_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            canonical::to_string(&json!({"error": e.to_string()})),
        ),
    }
}

pub fn router(service: Arc<RewardService>) -> Router {
    let state = Arc::new(AppState {
        service,
        in_flight: AtomicUsize::new(0),
    });
    Router::new()
        .route(
            "/v1/rewards/generator",
            post(|State(s): State<Arc<AppState>>, body: Bytes| score_endpoint(s, Role::Generator, body)),
        )
        .route(
            "/v1/rewards/solver",
            post(|State(s): State<Arc<AppState>>, body: Bytes| score_endpoint(s, Role::Solver, body)),
        )
        .route(
            "/v1/health",
            get(|State(s): State<Arc<AppState>>| async move {
                let body = json!({"in_flight": s.in_flight.load(Ordering::SeqCst), "status": "ok"});
                json_response(StatusCode::OK, canonical::to_string(&body))
            }),
        )
        .with_state(state)
}

/// A server running on its own runtime thread. Dropping the handle stops it.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
    // keeps backends alive until after the runtime is gone
    _service: Arc<RewardService>,
}

impl ServerHandle {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub fn spawn_server(service: Arc<RewardService>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
    let bound = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(service.clone());
    let thread = std::thread::Builder::new().name("reward-server".into()).spawn(move || {
        runtime.block_on(async move {
            let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = rx.await;
            });
            if let Err(e) = serve.await {
                tracing::error!("server error: {e}");
            }
        });
    })?;
    Ok(ServerHandle {
        addr: bound,
        shutdown: Some(tx),
        thread: Some(thread),
        _service: service,
    })
}

/// Serves in the foreground until Ctrl-C. `on_ready` gets the bound address.
pub fn serve_blocking(
    service: Arc<RewardService>,
    addr: SocketAddr,
    on_ready: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let app = router(service.clone());
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        on_ready(listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    drop(runtime);
    drop(service);
    Ok(())
}
