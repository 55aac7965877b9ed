//! Benchmark evaluation: exact structural matching of predicted tool calls
//! against gold, plus a failure taxonomy.
//!
//! Taxonomy precedence is fixed: a failure is `format` if the prediction
//! does not yield any canonical call, otherwise `structural` if call count,
//! tool names or argument key sets differ, otherwise `semantic`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::gateway::{DecodeParams, Gateway, GatewayError};
use crate::parse::{
    blocks, extract_block, normalize_calls, parse_solver_completion, tool_menu_from_value, ParseOutcome,
    ToolCall, ToolSpec,
};
use crate::solreward::{accuracy_reward, gold_value_oracle, values_equal, AccuracyWeights};
use crate::taskspec::render_solver_prompt;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: malformed lines {}", format_lines(.lines))]
    Ingest { path: String, lines: Vec<(usize, String)> },
    #[error("{0}: file has no records")]
    Empty(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn format_lines(lines: &[(usize, String)]) -> String {
    lines
        .iter()
        .map(|(n, msg)| format!("{n} ({msg})"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub question: String,
    pub tools: Vec<ToolSpec>,
    pub gold_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub completion: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Format,
    Structural,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCause {
    MissingPrediction,
    MissingAnswerBlock,
    Unparseable,
    Placeholder,
    NoCanonicalCall,
    WrongCallCount,
    WrongToolName,
    MissingKeys,
    ExtraKeys,
    MissingGoldValue,
    WrongValue,
}

impl ErrorCause {
    pub fn category(self) -> ErrorCategory {
        use ErrorCause::*;
        match self {
            MissingPrediction | MissingAnswerBlock | Unparseable | Placeholder | NoCanonicalCall => ErrorCategory::Format,
            WrongCallCount | WrongToolName | MissingKeys | ExtraKeys => ErrorCategory::Structural,
            MissingGoldValue | WrongValue => ErrorCategory::Semantic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorLabel {
    pub category: ErrorCategory,
    pub cause: ErrorCause,
}

impl From<ErrorCause> for ErrorLabel {
    fn from(cause: ErrorCause) -> Self {
        Self {
            category: cause.category(),
            cause,
        }
    }
}

impl fmt::Display for ErrorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("label serializes");
        write!(f, "{}/{}", s["category"].as_str().unwrap_or(""), s["cause"].as_str().unwrap_or(""))
    }
}

/// Parses a prediction. Text with a `<tool_call_answer>` block is read from
/// the block; bare text is treated as the answer itself.
pub fn parse_prediction(completion: &str) -> ParseOutcome<Vec<ToolCall>> {
    if extract_block(completion, blocks::TOOL_CALL_ANSWER).is_some() {
        parse_solver_completion(completion)
    } else {
        parse_solver_completion(&format!("<tool_call_answer>{completion}</tool_call_answer>"))
    }
}

/// Correct iff the predicted calls equal gold as a multiset.
pub fn ast_match(pred_completion: &str, item: &BenchmarkItem) -> bool {
    parse_prediction(pred_completion)
        .value
        .is_some_and(|calls| gold_value_oracle(&calls, &item.gold_calls))
}

fn format_cause(outcome: &ParseOutcome<Vec<ToolCall>>) -> ErrorCause {
    let f = &outcome.flags;
    if !f.tags_ok {
        ErrorCause::MissingAnswerBlock
    } else if f.placeholder {
        ErrorCause::Placeholder
    } else if !f.gold_json_ok {
        ErrorCause::Unparseable
    } else {
        ErrorCause::NoCanonicalCall
    }
}

fn is_absent(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::String(s) => s.trim().is_empty(),
        _ => false,
    }
}

/// Labels a wrong prediction. Calls are paired with the same greedy matcher
/// the accuracy reward uses before comparing keys and values.
pub fn classify_calls(preds: &[ToolCall], golds: &[ToolCall]) -> ErrorLabel {
    if preds.len() != golds.len() {
        return ErrorCause::WrongCallCount.into();
    }
    fn names(calls: &[ToolCall]) -> Vec<&str> {
        let mut v: Vec<&str> = calls.iter().map(|c| c.name.as_str()).collect();
        v.sort_unstable();
        v
    }
    if names(preds) != names(golds) {
        return ErrorCause::WrongToolName.into();
    }
    let report = accuracy_reward(preds, golds, &AccuracyWeights::default());
    let pairs: Vec<(&ToolCall, &ToolCall)> = report
        .matches
        .iter()
        .filter_map(|m| m.pred_index.map(|p| (&preds[p], &golds[m.gold_index])))
        .collect();
    let key_diff = |p: &ToolCall, g: &ToolCall| {
        let pk: BTreeSet<&String> = p.arguments.keys().collect();
        let gk: BTreeSet<&String> = g.arguments.keys().collect();
        (gk.difference(&pk).count() > 0, pk.difference(&gk).count() > 0)
    };
    if pairs.iter().any(|(p, g)| p.name != g.name) {
        return ErrorCause::WrongToolName.into();
    }
    if pairs.iter().any(|(p, g)| key_diff(p, g).0) {
        return ErrorCause::MissingKeys.into();
    }
    if pairs.iter().any(|(p, g)| key_diff(p, g).1) {
        return ErrorCause::ExtraKeys.into();
    }
    let absent = pairs.iter().any(|(p, g)| {
        g.arguments
            .iter()
            .any(|(k, gv)| !is_absent(gv) && p.arguments.get(k).is_some_and(is_absent))
    });
    if absent {
        return ErrorCause::MissingGoldValue.into();
    }
    debug_assert!(pairs
        .iter()
        .any(|(p, g)| g.arguments.iter().any(|(k, gv)| !values_equal(&p.arguments[k], gv))));
    ErrorCause::WrongValue.into()
}

/// Taxonomy label for an incorrect prediction, `None` when it is correct.
pub fn classify_error(pred_completion: &str, item: &BenchmarkItem) -> Option<ErrorLabel> {
    let outcome = parse_prediction(pred_completion);
    match &outcome.value {
        None => Some(format_cause(&outcome).into()),
        Some(calls) if gold_value_oracle(calls, &item.gold_calls) => None,
        Some(calls) => Some(classify_calls(calls, &item.gold_calls)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<ErrorLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub histogram: BTreeMap<ErrorCategory, BTreeMap<ErrorCause, usize>>,
    pub verdicts: Vec<Verdict>,
}

pub fn judge_item(item: &BenchmarkItem, completion: Option<&str>) -> Verdict {
    let label = match completion {
        None => Some(ErrorCause::MissingPrediction.into()),
        Some(text) => classify_error(text, item),
    };
    Verdict {
        id: item.id.clone(),
        correct: label.is_none(),
        label,
    }
}

pub fn build_report(verdicts: Vec<Verdict>) -> EvalReport {
    let total = verdicts.len();
    let correct = verdicts.iter().filter(|v| v.correct).count();
    let mut histogram: BTreeMap<ErrorCategory, BTreeMap<ErrorCause, usize>> = BTreeMap::new();
    for label in verdicts.iter().filter_map(|v| v.label) {
        *histogram.entry(label.category).or_default().entry(label.cause).or_default() += 1;
    }
    EvalReport {
        total,
        correct,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        histogram,
        verdicts,
    }
}

/// Scores items against predictions matched by id.
pub fn evaluate_predictions(items: &[BenchmarkItem], preds: &[Prediction]) -> EvalReport {
    let by_id: BTreeMap<&str, &str> = preds.iter().map(|p| (p.id.as_str(), p.completion.as_str())).collect();
    build_report(
        items
            .iter()
            .map(|item| judge_item(item, by_id.get(item.id.as_str()).copied()))
            .collect(),
    )
}

/// Asks the solver behind `gateway` for one answer per item, then scores.
pub fn evaluate_with_gateway(
    items: &[BenchmarkItem],
    gateway: &Gateway,
    params: DecodeParams,
) -> Result<(EvalReport, Vec<Prediction>), EvalError> {
    let results = gateway.map_parallel(items, |item| -> Result<Prediction, GatewayError> {
        let prompt = render_solver_prompt(&item.question, &item.tools, gateway.prompts())?;
        let req = crate::gateway::CompletionRequest {
            prompt,
            n: 1,
            params,
            sample_offset: 0,
        };
        Ok(Prediction {
            id: item.id.clone(),
            completion: gateway.complete(&req)?.remove(0),
        })
    });
    let preds = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok((evaluate_predictions(items, &preds), preds))
}

fn read_file(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Parses line-delimited records, collecting every bad line before failing.
pub fn parse_records<T: for<'de> Deserialize<'de>>(
    text: &str,
    path: &str,
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(line).map_err(|e| e.to_string()).and_then(|r| check(&r).map(|_| r)) {
            Ok(r) => out.push(r),
            Err(e) => bad.push((i + 1, e)),
        }
    }
    if !bad.is_empty() {
        return Err(EvalError::Ingest {
            path: path.to_string(),
            lines: bad,
        });
    }
    if out.is_empty() {
        return Err(EvalError::Empty(path.to_string()));
    }
    Ok(out)
}

fn check_item(item: &BenchmarkItem) -> Result<(), String> {
    if item.gold_calls.is_empty() {
        return Err("gold_calls is empty".into());
    }
    item.tools.iter().try_for_each(ToolSpec::validate)
}

pub fn parse_benchmark(text: &str, path: &str) -> Result<Vec<BenchmarkItem>, EvalError> {
    let items = parse_records(text, path, check_item)?;
    let mut seen = BTreeSet::new();
    let dupes: Vec<(usize, String)> = items
        .iter()
        .enumerate()
        .filter(|(_, it)| !seen.insert(it.id.clone()))
        .map(|(i, it)| (i + 1, format!("duplicate id `{}`", it.id)))
        .collect();
    if !dupes.is_empty() {
        return Err(EvalError::Ingest {
            path: path.to_string(),
            lines: dupes,
        });
    }
    Ok(items)
}

pub fn load_benchmark(path: &Path) -> Result<Vec<BenchmarkItem>, EvalError> {
    parse_benchmark(&read_file(path)?, &path.display().to_string())
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    parse_records(&read_file(path)?, &path.display().to_string(), |_| Ok(()))
}

pub enum PredictionSource<'a> {
    File(PathBuf),
    Backend { gateway: &'a Gateway, params: DecodeParams },
}

pub fn evaluate_file(bench: &Path, source: PredictionSource<'_>) -> Result<EvalReport, EvalError> {
    let items = load_benchmark(bench)?;
    match source {
        PredictionSource::File(path) => Ok(evaluate_predictions(&items, &load_predictions(&path)?)),
        PredictionSource::Backend { gateway, params } => Ok(evaluate_with_gateway(&items, gateway, params)?.0),
    }
}

/// Converts an OpenAI-tools-style record into a benchmark item:
/// `{"id", "messages": [..], "tools": [{"type": "function", "function": {..}}], "tool_calls": [..]}`.
/// The last user message becomes the question and earlier messages the
/// history. `question` and `gold_calls` keys are accepted as alternatives.
pub fn from_openai_style(record: &Value) -> Result<BenchmarkItem, String> {
    let obj = record.as_object().ok_or("record is not an object")?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err("missing id".into()),
    };
    let (question, history) = match (obj.get("question"), obj.get("messages")) {
        (Some(Value::String(q)), _) => (q.clone(), None),
        (_, Some(Value::Array(msgs))) => {
            let last_user = msgs
                .iter()
                .rposition(|m| m.get("role").and_then(Value::as_str) == Some("user"))
                .ok_or("no user message")?;
            let q = msgs[last_user]
                .get("content")
                .and_then(Value::as_str)
                .ok_or("user message has no text content")?;
            let history = (last_user > 0).then(|| msgs[..last_user].to_vec());
            (q.to_string(), history)
        }
        _ => return Err("missing question or messages".into()),
    };
    let tools = tool_menu_from_value(obj.get("tools").ok_or("missing tools")?).map_err(|e| e.to_string())?;
    let gold_value = obj
        .get("tool_calls")
        .or_else(|| obj.get("gold_calls"))
        .ok_or("missing tool_calls")?;
    let gold_calls = normalize_calls(gold_value)
        .and_then(|n| n.strict())
        .map_err(|e| e.to_string())?;
    let item = BenchmarkItem {
        id,
        question,
        tools,
        gold_calls,
        history,
    };
    check_item(&item)?;
    Ok(item)
}
