//! Block extraction, relaxed parsing and canonicalization of model
//! completions into verifiable tool menus and tool calls.

pub mod blocks;
pub mod menu;
pub mod normalize;
pub mod relaxed;
mod types;

pub use blocks::{extract_block, extract_blocks, RawBlocks};
pub use menu::{parse_tool_menu, tool_menu_from_value, MenuError};
pub use normalize::{normalize_calls, NormalizeError, Normalized, RejectedCall};
pub use relaxed::{parse_relaxed, strip_code_fence, RelaxedError};
pub use types::{
    calls_to_canonical_json, is_primitive, GeneratedTask, ParamSpec, ParseFlags, ParseOutcome,
    ToolCall, ToolSpec,
};

/// Everything recovered from a generator completion, including the pieces
/// that parsed when the whole did not.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParse {
    /// `value` is set only when every stage succeeded.
    pub outcome: ParseOutcome<GeneratedTask>,
    pub blocks: RawBlocks,
    pub tools: Option<Vec<ToolSpec>>,
    pub gold_calls: Option<Vec<ToolCall>>,
}

impl GeneratorParse {
    pub fn task(&self) -> Option<&GeneratedTask> {
        self.outcome.value.as_ref()
    }
}

pub fn parse_generator_completion(completion: &str) -> GeneratorParse {
    let extracted = extract_blocks(completion);
    let mut flags = extracted.flags;
    let mut diagnostics = extracted.diagnostics;
    let blocks = extracted.value.unwrap_or_default();

    let tools = blocks.available_tools.as_deref().and_then(|b| match parse_tool_menu(b) {
        Ok(menu) => Some(menu),
        Err(e) => {
            diagnostics.push(format!("available_tools: {e}"));
            None
        }
    });
    flags.tools_json_ok = tools.is_some();

    let gold_calls = blocks.tool_call_answer.as_deref().and_then(|b| {
        let parsed = match parse_relaxed(b) {
            Ok(v) => v,
            Err(e) => {
                flags.placeholder = e.is_placeholder();
                diagnostics.push(format!("tool_call_answer: {e}"));
                return None;
            }
        };
        flags.gold_json_ok = true;
        match normalize_calls(&parsed).and_then(Normalized::strict) {
            Ok(calls) => Some(calls),
            Err(e) => {
                diagnostics.push(format!("tool_call_answer: {e}"));
                None
            }
        }
    });
    flags.normalized_ok = gold_calls.is_some();

    let value = match (&blocks, &tools, &gold_calls) {
        (
            RawBlocks {
                think: Some(think),
                question: Some(question),
                ..
            },
            Some(tools),
            Some(gold),
        ) if flags.tags_ok => Some(GeneratedTask {
            think: think.clone(),
            question: question.clone(),
            tools: tools.clone(),
            gold_calls: gold.clone(),
            raw: completion.to_string(),
        }),
        _ => None,
    };

    GeneratorParse {
        outcome: ParseOutcome {
            flags,
            value,
            diagnostics,
        },
        blocks,
        tools,
        gold_calls,
    }
}

/// Parses a solver completion. Flags map onto the solver format indicators:
/// `tags_ok` is a non-empty `<tool_call_answer>` block, `gold_json_ok` means
/// the block parsed, `normalized_ok` means at least one canonical call came
/// out. Calls that fail normalization are dropped with a diagnostic.
pub fn parse_solver_completion(completion: &str) -> ParseOutcome<Vec<ToolCall>> {
    let mut flags = ParseFlags::default();
    let mut diagnostics = Vec::new();
    let block = extract_block(completion, blocks::TOOL_CALL_ANSWER).filter(|b| !b.is_empty());
    let Some(block) = block else {
        diagnostics.push("missing or empty <tool_call_answer> block".to_string());
        return ParseOutcome { flags, value: None, diagnostics };
    };
    flags.tags_ok = true;

    let parsed = match parse_relaxed(&block) {
        Ok(v) => v,
        Err(e) => {
            flags.placeholder = e.is_placeholder();
            diagnostics.push(e.to_string());
            return ParseOutcome { flags, value: None, diagnostics };
        }
    };
    flags.gold_json_ok = true;

    let normalized = match normalize_calls(&parsed) {
        Ok(n) => n,
        Err(e) => {
            diagnostics.push(e.to_string());
            return ParseOutcome { flags, value: None, diagnostics };
        }
    };
    diagnostics.extend(
        normalized
            .rejected
            .iter()
            .map(|r| format!("call {}: {}", r.index, r.error)),
    );
    let value = normalized.lenient().ok();
    flags.normalized_ok = value.is_some();
    ParseOutcome { flags, value, diagnostics }
}
