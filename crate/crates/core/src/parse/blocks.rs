use super::types::{ParseFlags, ParseOutcome};

pub const THINK: &str = "think";
pub const QUESTION: &str = "question";
pub const AVAILABLE_TOOLS: &str = "available_tools";
pub const TOOL_CALL_ANSWER: &str = "tool_call_answer";

/// The four generator blocks, trimmed. `None` when the block is missing or
/// unterminated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawBlocks {
    pub think: Option<String>,
    pub question: Option<String>,
    pub available_tools: Option<String>,
    pub tool_call_answer: Option<String>,
}

/// First `<tag>...</tag>` occurrence, trimmed. Tags are case-sensitive.
pub fn extract_block(completion: &str, tag: &str) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = completion.find(&open)? + open.len();
    let len = completion[start..].find(&close)?;
    Some(completion[start..start + len].trim().to_string())
}

/// Extracts all four generator blocks; `tags_ok` holds iff every block is
/// present with its closing tag. Block order does not matter.
pub fn extract_blocks(completion: &str) -> ParseOutcome<RawBlocks> {
    let blocks = RawBlocks {
        think: extract_block(completion, THINK),
        question: extract_block(completion, QUESTION),
        available_tools: extract_block(completion, AVAILABLE_TOOLS),
        tool_call_answer: extract_block(completion, TOOL_CALL_ANSWER),
    };
    let diagnostics: Vec<String> = [
        (THINK, &blocks.think),
        (QUESTION, &blocks.question),
        (AVAILABLE_TOOLS, &blocks.available_tools),
        (TOOL_CALL_ANSWER, &blocks.tool_call_answer),
    ]
    .into_iter()
    .filter(|(_, b)| b.is_none())
    .map(|(tag, _)| missing_tag_message(completion, tag))
    .collect();
    ParseOutcome {
        flags: ParseFlags {
            tags_ok: diagnostics.is_empty(),
            ..ParseFlags::default()
        },
        value: Some(blocks),
        diagnostics,
    }
}

fn missing_tag_message(completion: &str, tag: &str) -> String {
    if completion.contains(&format!("<{tag}>")) {
        format!("missing closing tag </{tag}>")
    } else {
        format!("missing block <{tag}>")
    }
}
