//! Solver rewards: graded format credit and dense accuracy with greedy
//! gold-to-prediction matching and an extra-call penalty.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical;
use crate::parse::{parse_solver_completion, ParseFlags, ParseOutcome, ToolCall};

/// Digit strings longer than this are identifiers, never numbers.
pub const LONG_NUMERIC_DIGITS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverFormatWeights {
    pub lambda_tag: f64,
    pub lambda_parse: f64,
    pub lambda_norm: f64,
}

impl Default for SolverFormatWeights {
    fn default() -> Self {
        Self {
            lambda_tag: 0.3,
            lambda_parse: 0.3,
            lambda_norm: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccuracyWeights {
    pub lambda_name: f64,
    pub lambda_key: f64,
    pub lambda_val: f64,
    /// Extra-call penalty coefficient.
    pub alpha: f64,
}

impl Default for AccuracyWeights {
    fn default() -> Self {
        Self {
            lambda_name: 0.2,
            lambda_key: 0.3,
            lambda_val: 0.5,
            alpha: 0.25,
        }
    }
}

/// `λ_tag·tag + λ_parse·parse + λ_norm·norm`. A completion whose answer holds
/// an ellipsis placeholder earns nothing.
pub fn solver_format_reward(flags: &ParseFlags, w: &SolverFormatWeights) -> f64 {
    if flags.placeholder {
        return 0.0;
    }
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    w.lambda_tag * ind(flags.tags_ok)
        + w.lambda_parse * ind(flags.gold_json_ok)
        + w.lambda_norm * ind(flags.normalized_ok)
}

static NUMERIC_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$").expect("static regex"));

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_long_numeric(v: &Value) -> bool {
    let digits = |s: &str| {
        let s = s.strip_prefix('-').unwrap_or(s);
        !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && s.len() > LONG_NUMERIC_DIGITS
    };
    match v {
        Value::String(s) => digits(s.trim()),
        Value::Number(n) if n.is_u64() || n.is_i64() => digits(&n.to_string()),
        _ => false,
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(collapse_ws(s)),
        Value::Number(n) => Some(canonical::decimal(n)),
        _ => None,
    }
}

fn as_number(v: &Value) -> Option<f64> {
    let f = match v {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) if NUMERIC_TEXT.is_match(s.trim()) => s.trim().parse().ok()?,
        _ => return None,
    };
    f.is_finite().then_some(f)
}

/// Robust primitive comparison: exact, then identifier rule for long digit
/// strings, then numeric coercion, then whitespace-normalized strings, then
/// canonical JSON text.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    if a == b {
        return true;
    }
    if is_long_numeric(a) || is_long_numeric(b) {
        return matches!((scalar_text(a), scalar_text(b)), (Some(x), Some(y)) if x == y);
    }
    if let (Some(x), Some(y)) = (as_number(a), as_number(b)) {
        if x == y {
            return true;
        }
    }
    if let (Value::String(x), Value::String(y)) = (a, b) {
        if collapse_ws(x) == collapse_ws(y) {
            return true;
        }
    }
    canonical::to_string(a) == canonical::to_string(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub s_name: f64,
    pub s_key: f64,
    pub s_val: f64,
    pub score: f64,
}

pub fn pair_score(pred: &ToolCall, gold: &ToolCall, w: &AccuracyWeights) -> PairScore {
    let s_name = if pred.name == gold.name { 1.0 } else { 0.0 };
    let pred_keys: BTreeSet<&String> = pred.arguments.keys().collect();
    let gold_keys: BTreeSet<&String> = gold.arguments.keys().collect();
    let shared: Vec<&String> = pred_keys.intersection(&gold_keys).copied().collect();
    let s_key = if pred_keys.is_empty() && gold_keys.is_empty() {
        1.0
    } else {
        2.0 * shared.len() as f64 / (pred_keys.len() + gold_keys.len()) as f64
    };
    // vacuously 1 on an empty intersection; s_key already carries the miss
    let s_val = if shared.is_empty() {
        1.0
    } else {
        let equal = shared
            .iter()
            .filter(|k| values_equal(&pred.arguments[**k], &gold.arguments[**k]))
            .count();
        equal as f64 / shared.len() as f64
    };
    PairScore {
        s_name,
        s_key,
        s_val,
        score: w.lambda_name * s_name + w.lambda_key * s_key + w.lambda_val * s_val,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldMatch {
    pub gold_index: usize,
    pub pred_index: Option<usize>,
    pub pair: Option<PairScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub matches: Vec<GoldMatch>,
    pub base_accuracy: f64,
    pub penalty_factor: f64,
    pub r_acc: f64,
}

/// Greedy maximum matching: golds in order, each takes the highest-scoring
/// unused prediction (lowest index on ties). `s̄` averages over all golds;
/// unmatched golds count as 0.
pub fn accuracy_reward(preds: &[ToolCall], golds: &[ToolCall], w: &AccuracyWeights) -> MatchReport {
    let mut used = vec![false; preds.len()];
    let mut matches = Vec::with_capacity(golds.len());
    for (gold_index, gold) in golds.iter().enumerate() {
        let mut best: Option<(usize, PairScore)> = None;
        for (j, pred) in preds.iter().enumerate() {
            if used[j] {
                continue;
            }
            let s = pair_score(pred, gold, w);
            if best.is_none_or(|(_, b)| s.score > b.score) {
                best = Some((j, s));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
        }
        matches.push(GoldMatch {
            gold_index,
            pred_index: best.map(|(j, _)| j),
            pair: best.map(|(_, s)| s),
        });
    }
    let base_accuracy = if golds.is_empty() {
        0.0
    } else {
        matches.iter().filter_map(|m| m.pair.map(|p| p.score)).sum::<f64>() / golds.len() as f64
    };
    let extra = preds.len().saturating_sub(golds.len());
    let penalty_factor = 1.0 / (1.0 + w.alpha * extra as f64);
    MatchReport {
        matches,
        base_accuracy,
        penalty_factor,
        r_acc: base_accuracy * penalty_factor,
    }
}

/// Exact call equality: same name, same key set, every value `values_equal`.
pub fn calls_equal(pred: &ToolCall, gold: &ToolCall) -> bool {
    pred.name == gold.name
        && pred.arguments.len() == gold.arguments.len()
        && pred
            .arguments
            .iter()
            .all(|(k, v)| gold.arguments.get(k).is_some_and(|g| values_equal(v, g)))
}

/// Strict oracle: the prediction list equals the gold list as a multiset.
pub fn gold_value_oracle(preds: &[ToolCall], golds: &[ToolCall]) -> bool {
    if preds.len() != golds.len() {
        return false;
    }
    // bipartite perfect matching by augmenting paths
    let adj: Vec<Vec<usize>> = golds
        .iter()
        .map(|g| (0..preds.len()).filter(|&j| calls_equal(&preds[j], g)).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; preds.len()];
    fn augment(g: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &p in &adj[g] {
            if seen[p] {
                continue;
            }
            seen[p] = true;
            if owner[p].is_none_or(|other| augment(other, adj, seen, owner)) {
                owner[p] = Some(g);
                return true;
            }
        }
        false
    }
    (0..golds.len()).all(|g| augment(g, &adj, &mut vec![false; preds.len()], &mut owner))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRewardBreakdown {
    pub fmt: f64,
    pub acc: f64,
    pub base_accuracy: f64,
    pub penalty_factor: f64,
    pub total_raw: f64,
    /// `total_raw / 2`, in `[0, 1]`.
    pub total_normalized: f64,
}

impl SolverRewardBreakdown {
    pub fn zero() -> Self {
        Self {
            fmt: 0.0,
            acc: 0.0,
            base_accuracy: 0.0,
            penalty_factor: 1.0,
            total_raw: 0.0,
            total_normalized: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverRewardConfig {
    #[serde(default)]
    pub format: SolverFormatWeights,
    #[serde(default)]
    pub accuracy: AccuracyWeights,
}

/// Scores one solver completion against gold calls.
pub fn score_solver_completion(
    completion: &str,
    golds: &[ToolCall],
    cfg: &SolverRewardConfig,
) -> (SolverRewardBreakdown, ParseOutcome<Vec<ToolCall>>) {
    let parsed = parse_solver_completion(completion);
    let fmt = solver_format_reward(&parsed.flags, &cfg.format);
    let report = match (&parsed.value, parsed.flags.placeholder) {
        (Some(preds), false) => Some(accuracy_reward(preds, golds, &cfg.accuracy)),
        _ => None,
    };
    let (acc, base_accuracy, penalty_factor) = report
        .as_ref()
        .map_or((0.0, 0.0, 1.0), |r| (r.r_acc, r.base_accuracy, r.penalty_factor));
    let total_raw = fmt + acc;
    (
        SolverRewardBreakdown {
            fmt,
            acc,
            base_accuracy,
            penalty_factor,
            total_raw,
            total_normalized: total_raw / 2.0,
        },
        parsed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn call(name: &str, args: Value) -> ToolCall {
        ToolCall::from_json(name, args)
    }

    #[test]
    fn value_comparison_rules() {
        assert!(values_equal(&json!("7"), &json!(7)));
        assert!(values_equal(&json!(7), &json!(7.0)));
        assert!(values_equal(&json!(" Paris "), &json!("Paris")));
        assert!(values_equal(&json!("New  York"), &json!("New York")));
        assert!(!values_equal(&json!("12345678901234567890"), &json!(12345678901234567890.0)));
        assert!(values_equal(&json!("12345678901234567890"), &json!(12345678901234567890u64)));
        assert!(!values_equal(&json!("1234567890123456"), &json!("1234567890123457")));
        assert!(values_equal(&json!("123456789012345"), &json!(123456789012345u64)));
        assert!(!values_equal(&json!("Paris"), &json!("paris")));
        assert!(!values_equal(&json!("true"), &json!(true)));
        assert!(!values_equal(&json!("nan"), &json!("NaN")));
        assert!(values_equal(&json!(null), &json!(null)));
        assert!(!values_equal(&json!("7"), &json!(8)));
    }

    #[test]
    fn pair_scores() {
        let a = call("f", json!({"city": "Paris", "date": "x"}));
        let p = pair_score(&a, &a, &AccuracyWeights::default());
        assert_eq!((p.s_name, p.s_key, p.s_val, p.score), (1.0, 1.0, 1.0, 1.0));

        let gold = call("book", json!({"city": "Paris", "date": "2024-01-01"}));
        let pred = call("book", json!({"city": "Paris", "guests": 2}));
        let p = pair_score(&pred, &gold, &AccuracyWeights::default());
        assert_eq!((p.s_name, p.s_key, p.s_val), (1.0, 0.5, 1.0));
        assert!((p.score - 0.85).abs() < 1e-12);

        let p = pair_score(&call("g", json!({"x": 1})), &call("f", json!({"x": "1"})), &AccuracyWeights::default());
        assert_eq!((p.s_name, p.s_key, p.s_val), (0.0, 1.0, 1.0));
        assert!((p.score - 0.8).abs() < 1e-12);

        let empty = pair_score(&call("f", json!({})), &call("f", json!({})), &AccuracyWeights::default());
        assert_eq!(empty.score, 1.0);
    }

    #[test]
    fn accuracy_and_penalty() {
        let w = AccuracyWeights::default();
        let g = call("f", json!({"a": 1}));
        assert_eq!(accuracy_reward(&[g.clone()], &[g.clone()], &w).r_acc, 1.0);
        let extra = accuracy_reward(&[g.clone(), call("h", json!({}))], &[g.clone()], &w);
        assert_eq!(extra.penalty_factor, 0.8);
        assert_eq!(extra.r_acc, 0.8);
        let two = accuracy_reward(&[g.clone()], &[g.clone(), call("k", json!({"b": 2}))], &w);
        assert_eq!(two.base_accuracy, 0.5);
        assert_eq!(two.r_acc, 0.5);
        assert_eq!(two.matches[1].pred_index, None);
        let none = accuracy_reward(&[], &[g], &w);
        assert_eq!(none.r_acc, 0.0);
        assert!(none.matches.iter().all(|m| m.pred_index.is_none()));
    }

    #[test]
    fn ties_go_to_lowest_prediction_index() {
        let w = AccuracyWeights::default();
        let gold = call("f", json!({"a": 1}));
        let preds = [call("x", json!({"a": 1})), call("y", json!({"a": 1}))];
        let r = accuracy_reward(&preds, &[gold], &w);
        assert_eq!(r.matches[0].pred_index, Some(0));
    }

    #[test]
    fn strict_oracle_is_a_multiset_check() {
        let a = call("f", json!({"a": 1}));
        let b = call("g", json!({"b": "x"}));
        assert!(gold_value_oracle(&[a.clone(), b.clone()], &[a.clone(), b.clone()]));
        assert!(gold_value_oracle(&[b.clone(), a.clone()], &[a.clone(), b.clone()]));
        assert!(!gold_value_oracle(&[a.clone()], &[a.clone(), b.clone()]));
        assert!(!gold_value_oracle(&[call("g", json!({"b": "y"})), a.clone()], &[a.clone(), b]));
        assert!(gold_value_oracle(&[call("f", json!({"a": "1"}))], &[a]));
    }

    #[test]
    fn format_reward_grades() {
        let cfg = SolverRewardConfig::default();
        let (r, _) = score_solver_completion("<tool_call_answer>[{\"name\": \"f\", \"arguments\": {\"a\": 1}}]</tool_call_answer>", &[call("f", json!({"a": 1}))], &cfg);
        assert_eq!((r.fmt, r.acc, r.total_raw), (1.0, 1.0, 2.0));
        let (r, _) = score_solver_completion("<tool_call_answer>{{{</tool_call_answer>", &[call("f", json!({}))], &cfg);
        assert_eq!(r.fmt, 0.3);
        let (r, _) = score_solver_completion("<tool_call_answer>[{\"arguments\": {}}]</tool_call_answer>", &[call("f", json!({}))], &cfg);
        assert!((r.fmt - 0.6).abs() < 1e-12);
        let (r, _) = score_solver_completion("<tool_call_answer>[{\"name\": \"f\", \"arguments\": {...}}]</tool_call_answer>", &[call("f", json!({}))], &cfg);
        assert_eq!((r.fmt, r.acc), (0.0, 0.0));
    }
}
