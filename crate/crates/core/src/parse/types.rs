use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical;

/// A single tool invocation with a flat map of primitive arguments.
///
/// Argument keys live in a `BTreeMap`, so two equal calls always serialize
/// to the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawToolCall")]
pub struct ToolCall {
    pub name: String,
    pub arguments: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawToolCall {
    name: String,
    #[serde(default)]
    arguments: BTreeMap<String, Value>,
}

impl TryFrom<RawToolCall> for ToolCall {
    type Error = String;

    fn try_from(raw: RawToolCall) -> Result<Self, Self::Error> {
        ToolCall::new(raw.name, raw.arguments)
    }
}

impl ToolCall {
    /// Builds a call, rejecting empty names and non-primitive arguments.
    pub fn new(
        name: impl Into<String>,
        arguments: BTreeMap<String, Value>,
    ) -> Result<Self, String> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err("tool call name is empty".into());
        }
        if let Some((key, _)) = arguments.iter().find(|(_, v)| !is_primitive(v)) {
            return Err(format!("argument `{key}` is not a flat primitive"));
        }
        Ok(Self { name, arguments })
    }

    /// Test and fixture helper: builds from a `json!` object of arguments.
    ///
    /// Panics when `arguments` is not an object of primitives.
    pub fn from_json(name: &str, arguments: Value) -> Self {
        let Value::Object(map) = arguments else {
            panic!("arguments must be an object");
        };
        Self::new(name, map.into_iter().collect()).expect("valid tool call")
    }

    pub fn canonical_json(&self) -> String {
        canonical::to_string(self)
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_json())
    }
}

pub fn is_primitive(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

/// Serializes a list of calls in the canonical wire form.
pub fn calls_to_canonical_json(calls: &[ToolCall]) -> String {
    canonical::to_string(&calls)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ParamSpec {
    #[serde(rename = "type", default)]
    pub kind: String,
    #[serde(default)]
    pub description: String,
}

/// One entry of a tool menu.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamSpec>,
    #[serde(default)]
    pub required: Vec<String>,
}

impl ToolSpec {
    /// Checks the menu-entry invariants: non-empty name, and every required
    /// parameter declared.
    pub fn validate(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("tool name is empty".into());
        }
        if let Some(missing) = self.required.iter().find(|r| !self.parameters.contains_key(*r)) {
            return Err(format!(
                "tool `{}` requires undeclared parameter `{missing}`",
                self.name
            ));
        }
        Ok(())
    }
}

/// A fully parsed generator completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTask {
    pub think: String,
    pub question: String,
    pub tools: Vec<ToolSpec>,
    pub gold_calls: Vec<ToolCall>,
    pub raw: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFlags {
    pub tags_ok: bool,
    pub tools_json_ok: bool,
    pub gold_json_ok: bool,
    pub normalized_ok: bool,
    /// The answer block contained an ellipsis placeholder.
    pub placeholder: bool,
}

/// Result of a parsing stage: indicator flags plus whatever value the stage
/// managed to produce.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome<T> {
    pub flags: ParseFlags,
    pub value: Option<T>,
    pub diagnostics: Vec<String>,
}
