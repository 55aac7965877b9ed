use std::sync::Arc;

use serde_json::{json, Value};
use toolplay::gateway::GatewayConfig;
use toolplay::service::{spawn_server, RewardService, ServerHandle};
use toolplay::taskspec::{PromptBundle, SpecDistribution};
use toolplay::world::{successes_for, ScriptedWorld, JUDGE_REPLY};

fn server() -> (ServerHandle, ScriptedWorld) {
    let prompts = Arc::new(PromptBundle::default());
    let world = ScriptedWorld::build(&SpecDistribution::default(), 3, 40, &prompts).unwrap();
    let b = world.backends(prompts, GatewayConfig::default()).unwrap();
    let svc = RewardService {
        solver_gateway: Some(b.solver),
        judge_gateway: Some(b.judge),
        ..RewardService::default()
    };
    (spawn_server(Arc::new(svc), "127.0.0.1:0".parse().unwrap()).unwrap(), world)
}

fn post(h: &ServerHandle, path: &str, body: &Value) -> (u16, Value) {
    let resp = reqwest::blocking::Client::new().post(h.url(path)).json(body).send().unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().unwrap())
}

#[test]
fn solver_endpoint_scores_in_order() {
    let (h, _) = server();
    let gold = json!([{"name": "f", "arguments": {"a": 1}}]);
    let body = json!({"items": [
        {"completion": "<tool_call_answer>[{\"name\": \"f\", \"arguments\": {\"a\": 1}}]</tool_call_answer>", "context": {"gold_calls": gold}},
        {"completion": "", "context": {"gold_calls": gold}},
        {"completion": "<tool_call_answer>[{'name': 'f', 'arguments': {'a': 2}}]</tool_call_answer>", "context": {"gold_calls": gold}},
    ]});
    let (status, resp) = post(&h, "/v1/rewards/solver", &body);
    assert_eq!(status, 200);
    assert_eq!(resp["role"], "solver");
    let r = resp["results"].as_array().unwrap();
    assert_eq!(r.len(), 3);
    assert_eq!(r.iter().map(|x| x["index"].as_u64().unwrap()).collect::<Vec<_>>(), [0, 1, 2]);
    assert_eq!((r[0]["breakdown"]["fmt"].as_f64(), r[0]["breakdown"]["acc"].as_f64()), (Some(1.0), Some(1.0)));
    assert_eq!(r[1]["ok"], false);
    assert_eq!(r[1]["breakdown"]["total_raw"], 0.0);
    assert!(!r[1]["diagnostics"].as_array().unwrap().is_empty());
    // name 0.2 + key F1 0.3, value wrong
    assert_eq!(r[2]["breakdown"]["acc"], 0.5);
}

#[test]
fn generator_endpoint_probes_the_solver() {
    let (h, world) = server();
    let plateau = world.entries.iter().find(|e| e.task.is_some() && e.successes == 4).unwrap();
    assert_eq!(successes_for(plateau.index), 4);
    let easy = world.entries.iter().find(|e| e.task.is_some() && e.successes == 8).unwrap();
    let body = json!({"items": [
        {"completion": plateau.completion, "context": {"spec": plateau.spec}},
        {"completion": easy.completion, "context": {"spec": easy.spec}},
        {"completion": "no tags here", "context": {}},
    ]});
    let (status, resp) = post(&h, "/v1/rewards/generator", &body);
    assert_eq!(status, 200);
    let r = &resp["results"];
    assert_eq!(r[0]["probe_successes"], 4);
    assert_eq!(r[0]["breakdown"]["diff"], 1.0);
    assert_eq!(r[0]["breakdown"]["p_succ"], 0.5);
    let judge: f64 = JUDGE_REPLY.parse().unwrap();
    assert_eq!(r[0]["breakdown"]["sem"], (judge - 1.0) / 4.0);
    assert_eq!(r[0]["breakdown"]["fmt"], 3);
    assert_eq!(r[0]["breakdown"]["valid"], 1.0);
    let expected_diff = (-(0.25f64.powi(2)) / (2.0 * 0.12f64.powi(2))).exp();
    assert!((r[1]["breakdown"]["diff"].as_f64().unwrap() - expected_diff).abs() < 1e-12);
    assert_eq!(r[2]["ok"], true);
    assert_eq!(r[2]["breakdown"]["total_raw"], 0.0);
}

#[test]
fn context_overrides_skip_the_backends() {
    let svc = RewardService::default();
    let h = spawn_server(Arc::new(svc), "127.0.0.1:0".parse().unwrap()).unwrap();
    let world = ScriptedWorld::build(&SpecDistribution::default(), 3, 5, &PromptBundle::default()).unwrap();
    let e = &world.entries[0];
    let body = json!({"items": [
        {"completion": e.completion, "context": {"p_succ": 0.5, "judge_score": 5}},
        {"completion": e.completion, "context": {}},
    ]});
    let (_, resp) = post(&h, "/v1/rewards/generator", &body);
    assert_eq!(resp["results"][0]["breakdown"]["curr"], 2.0);
    assert_eq!(resp["results"][1]["ok"], false);
}

#[test]
fn malformed_envelopes_are_400() {
    let (h, _) = server();
    let client = reqwest::blocking::Client::new();
    let bad = client.post(h.url("/v1/rewards/solver")).body("{not json").send().unwrap();
    assert_eq!(bad.status().as_u16(), 400);
    assert!(bad.json::<Value>().unwrap()["error"].is_string());
    let (status, _) = post(&h, "/v1/rewards/solver", &json!({"items": []}));
    assert_eq!(status, 400);
    let (status, _) = post(&h, "/v1/rewards/solver", &json!({"role": "generator", "items": [{"completion": "x"}]}));
    assert_eq!(status, 400);
    let (status, _) = post(
        &h,
        "/v1/rewards/solver",
        &json!({"items": [{"completion": "x", "context": {"bogus": 1}}]}),
    );
    assert_eq!(status, 400);
}

#[test]
fn overrides_change_the_weights() {
    let (h, _) = server();
    let gold = json!([{"name": "f", "arguments": {"a": 1}}]);
    let item = json!({"completion": "<tool_call_answer>[{\"name\": \"f\", \"arguments\": {\"a\": 2}}]</tool_call_answer>", "context": {"gold_calls": gold}});
    let body = json!({"items": [item], "overrides": {"solver": {"accuracy": {"lambda_name": 1.0, "lambda_key": 0.0, "lambda_val": 0.0}}}});
    let (status, resp) = post(&h, "/v1/rewards/solver", &body);
    assert_eq!(status, 200, "{resp}");
    assert_eq!(resp["results"][0]["breakdown"]["acc"], 1.0);
}

#[test]
fn health_reports_ok() {
    let (h, _) = server();
    let v: Value = reqwest::blocking::get(h.url("/v1/health")).unwrap().json().unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["in_flight"], 0);
}
