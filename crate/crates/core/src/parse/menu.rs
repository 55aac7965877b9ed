//! Tool-menu parsing. Accepts both the flat parameter layout
//! (`"parameters": {"p": {"type", "description"}}`) and the JSON-schema
//! layout (`"parameters": {"type": "object", "properties": {..}, "required": [..]}`).

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

use super::relaxed::{parse_relaxed, RelaxedError};
use super::types::{ParamSpec, ToolSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MenuError {
    #[error(transparent)]
    Parse(#[from] RelaxedError),
    #[error("tool menu must be a list")]
    NotAList,
    #[error("tool {index}: {reason}")]
    Entry { index: usize, reason: String },
}

pub fn parse_tool_menu(block: &str) -> Result<Vec<ToolSpec>, MenuError> {
    let value = parse_relaxed(block)?;
    tool_menu_from_value(&value)
}

/// All-or-nothing: one bad entry fails the whole menu.
pub fn tool_menu_from_value(value: &Value) -> Result<Vec<ToolSpec>, MenuError> {
    let Value::Array(entries) = value else {
        return Err(MenuError::NotAList);
    };
    entries
        .iter()
        .enumerate()
        .map(|(index, entry)| {
            tool_from_value(entry).map_err(|reason| MenuError::Entry { index, reason })
        })
        .collect()
}

fn tool_from_value(entry: &Value) -> Result<ToolSpec, String> {
    let Value::Object(obj) = entry else {
        return Err("entry is not an object".into());
    };
    // tolerate {"type": "function", "function": {...}} entries
    let obj = match obj.get("function") {
        Some(Value::Object(inner)) => inner,
        _ => obj,
    };
    let name = match obj.get("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        _ => return Err("missing name".into()),
    };
    let description = match obj.get("description") {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => String::new(),
        Some(_) => return Err(format!("tool `{name}`: description is not a string")),
    };

    let mut required = match obj.get("required") {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => string_list(v).ok_or_else(|| format!("tool `{name}`: required is not a list of names"))?,
    };
    let parameters = match obj.get("parameters") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(Value::Object(params)) => match params.get("properties") {
            Some(Value::Object(props)) => {
                if let Some(v) = params.get("required") {
                    let inner = string_list(v)
                        .ok_or_else(|| format!("tool `{name}`: required is not a list of names"))?;
                    for r in inner {
                        if !required.contains(&r) {
                            required.push(r);
                        }
                    }
                }
                param_map(&name, props)?
            }
            _ => param_map(&name, params)?,
        },
        Some(_) => return Err(format!("tool `{name}`: parameters is not an object")),
    };

    let spec = ToolSpec {
        name,
        description,
        parameters,
        required,
    };
    spec.validate()?;
    Ok(spec)
}

fn param_map(tool: &str, params: &Map<String, Value>) -> Result<BTreeMap<String, ParamSpec>, String> {
    params
        .iter()
        .map(|(key, v)| {
            let spec = match v {
                Value::Object(p) => ParamSpec {
                    kind: p.get("type").map(type_label).unwrap_or_default(),
                    description: p
                        .get("description")
                        .and_then(Value::as_str)
                        .unwrap_or_default()
                        .to_string(),
                },
                Value::String(kind) => ParamSpec {
                    kind: kind.clone(),
                    description: String::new(),
                },
                _ => return Err(format!("tool `{tool}`: parameter `{key}` is malformed")),
            };
            Ok((key.clone(), spec))
        })
        .collect()
}

fn type_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn string_list(v: &Value) -> Option<Vec<String>> {
    v.as_array()?
        .iter()
        .map(|x| x.as_str().map(str::to_string))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LATE_ITERATION_MENU: &str = include_str!("../../tests/fixtures/late_iteration_menu.json");

    #[test]
    fn two_flat_tools() {
        let menu = parse_tool_menu(
            r#"[{"name": "a", "description": "x", "parameters": {"p": {"type": "string", "description": "d"}}, "required": ["p"]},
                {"name": "b", "description": "y", "parameters": {}}]"#,
        )
        .unwrap();
        assert_eq!(menu.len(), 2);
        assert_eq!(menu[0].required, vec!["p"]);
        assert!(menu[1].required.is_empty());
    }

    #[test]
    fn schema_layout_from_late_iteration_example() {
        let menu = parse_tool_menu(LATE_ITERATION_MENU).unwrap();
        let summary: Vec<_> = menu
            .iter()
            .map(|t| (t.name.as_str(), t.parameters.len(), t.required.len()))
            .collect();
        assert_eq!(summary, vec![("FlightBooking", 6, 6), ("HotelBooking", 5, 5)]);
        assert_eq!(menu[0].parameters["passengerCount"].kind, "integer");
    }

    #[test]
    fn undeclared_required_names_the_parameter() {
        let err = parse_tool_menu(
            r#"[{"name": "a", "parameters": {"p": {"type": "string"}}, "required": ["p", "ghost"]}]"#,
        )
        .unwrap_err();
        match err {
            MenuError::Entry { index: 0, reason } => assert!(reason.contains("`ghost`"), "{reason}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_failures() {
        assert_eq!(parse_tool_menu(r#"{"name": "a"}"#), Err(MenuError::NotAList));
        assert!(matches!(
            parse_tool_menu(r#"[{"name": "a"}, {"description": "no name"}]"#),
            Err(MenuError::Entry { index: 1, .. })
        ));
        assert!(matches!(parse_tool_menu("[origin]"), Err(MenuError::Parse(_))));
    }
}
