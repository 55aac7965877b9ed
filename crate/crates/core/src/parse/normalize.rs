//! Maps the tool-call shapes models actually emit onto the canonical
//! `{name, arguments}` form.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

use super::relaxed::parse_relaxed;
use super::types::{is_primitive, ToolCall};

const NAME_FIELDS: [&str; 3] = ["name", "tool_name", "tool"];
const ARGUMENT_FIELDS: [&str; 3] = ["arguments", "args", "parameters"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("expected an object or a list of objects")]
    UnsupportedShape,
    #[error("call is not an object")]
    NotAnObject,
    #[error("no recognizable name field")]
    MissingName,
    #[error("arguments field is not an object")]
    InvalidArguments,
    #[error("argument `{0}` is nested; only flat primitives are allowed")]
    NestedArgument(String),
    #[error("no tool call could be normalized")]
    NoCalls,
    #[error("call {index}: {error}")]
    Rejected { index: usize, error: Box<NormalizeError> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedCall {
    pub index: usize,
    pub error: NormalizeError,
}

/// Calls that normalized, and those that did not (by position in the input).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Normalized {
    pub calls: Vec<ToolCall>,
    pub rejected: Vec<RejectedCall>,
}

impl Normalized {
    /// Every call must normalize and there must be at least one.
    pub fn strict(self) -> Result<Vec<ToolCall>, NormalizeError> {
        if let Some(r) = self.rejected.into_iter().next() {
            return Err(NormalizeError::Rejected {
                index: r.index,
                error: Box::new(r.error),
            });
        }
        if self.calls.is_empty() {
            return Err(NormalizeError::NoCalls);
        }
        Ok(self.calls)
    }

    /// Keeps whatever normalized; fails only if nothing did.
    pub fn lenient(self) -> Result<Vec<ToolCall>, NormalizeError> {
        if self.calls.is_empty() {
            return Err(self
                .rejected
                .into_iter()
                .next()
                .map(|r| r.error)
                .unwrap_or(NormalizeError::NoCalls));
        }
        Ok(self.calls)
    }
}

/// Normalizes a parsed payload into canonical calls.
///
/// A single object is promoted to a one-element list, `{"tool_calls": [..]}`
/// envelopes and `{"function": {..}}` wrappers are unwrapped, and an object
/// without an explicit arguments field contributes its remaining fields as a
/// flat argument map.
pub fn normalize_calls(parsed: &Value) -> Result<Normalized, NormalizeError> {
    let items: Vec<&Value> = match parsed {
        Value::Object(obj) => match obj.get("tool_calls") {
            Some(Value::Array(inner)) if obj.len() == 1 => inner.iter().collect(),
            _ => vec![parsed],
        },
        Value::Array(items) => items.iter().collect(),
        _ => return Err(NormalizeError::UnsupportedShape),
    };
    let mut out = Normalized::default();
    for (index, item) in items.into_iter().enumerate() {
        match normalize_one(item) {
            Ok(call) => out.calls.push(call),
            Err(error) => out.rejected.push(RejectedCall { index, error }),
        }
    }
    Ok(out)
}

fn normalize_one(item: &Value) -> Result<ToolCall, NormalizeError> {
    let Value::Object(outer) = item else {
        return Err(NormalizeError::NotAnObject);
    };
    let obj = match outer.get("function") {
        Some(Value::Object(inner)) => inner,
        _ => outer,
    };

    let (name_field, name) = NAME_FIELDS
        .iter()
        .find_map(|f| match obj.get(*f) {
            Some(Value::String(s)) if !s.trim().is_empty() => Some((*f, s.trim().to_string())),
            _ => None,
        })
        .or_else(|| match obj.get("function") {
            Some(Value::String(s)) if !s.trim().is_empty() => Some(("function", s.trim().to_string())),
            _ => None,
        })
        .ok_or(NormalizeError::MissingName)?;

    let arguments = match ARGUMENT_FIELDS.iter().find_map(|f| obj.get(*f)) {
        Some(Value::Object(map)) => flat_arguments(map)?,
        Some(Value::String(encoded)) => match parse_relaxed(encoded) {
            Ok(Value::Object(map)) => flat_arguments(&map)?,
            _ => return Err(NormalizeError::InvalidArguments),
        },
        Some(Value::Null) => BTreeMap::new(),
        Some(_) => return Err(NormalizeError::InvalidArguments),
        None => {
            let rest: Map<String, Value> = obj
                .iter()
                .filter(|(k, _)| k.as_str() != name_field)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            flat_arguments(&rest)?
        }
    };
    Ok(ToolCall { name, arguments })
}

fn flat_arguments(map: &Map<String, Value>) -> Result<BTreeMap<String, Value>, NormalizeError> {
    map.iter()
        .map(|(k, v)| {
            if is_primitive(v) {
                Ok((k.clone(), v.clone()))
            } else {
                Err(NormalizeError::NestedArgument(k.clone()))
            }
        })
        .collect()
}
