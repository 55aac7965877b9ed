//! Relaxed literal loader for model-emitted tool-call payloads.
//!
//! Accepts strict JSON, Python-literal style containers (single-quoted
//! strings, `True`/`False`/`None`, trailing commas) and either of those
//! wrapped in a Markdown code fence. Ellipsis placeholders are rejected with
//! a dedicated error so reward layers can zero them out. The accepted
//! language is written down in `docs/relaxed_grammar.md`.

use serde_json::{Map, Number, Value};
use thiserror::Error;

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelaxedError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("ellipsis placeholder at byte {offset}")]
    Placeholder { offset: usize },
}

impl RelaxedError {
    pub fn is_placeholder(&self) -> bool {
        matches!(self, RelaxedError::Placeholder { .. })
    }

    pub fn offset(&self) -> usize {
        match self {
            RelaxedError::Syntax { offset, .. } | RelaxedError::Placeholder { offset } => *offset,
        }
    }
}

/// Parse `input` under the relaxed grammar. Offsets in errors index into
/// `input` itself, fence included.
pub fn parse_relaxed(input: &str) -> Result<Value, RelaxedError> {
    let (body, base) = strip_code_fence(input);
    let mut parser = Parser {
        src: body,
        bytes: body.as_bytes(),
        pos: 0,
        base,
        depth: 0,
    };
    parser.skip_ws();
    let value = parser.value()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(parser.syntax("trailing characters after value"));
    }
    Ok(value)
}

/// Removes a surrounding triple-backtick fence (with optional info string).
/// Returns the inner text and its byte offset within `input`.
pub fn strip_code_fence(input: &str) -> (&str, usize) {
    let lead = input.len() - input.trim_start().len();
    let trimmed = input.trim();
    let Some(after_ticks) = trimmed.strip_prefix("```") else {
        return (input, 0);
    };
    // info string runs to the end of the first line
    let (inner_start, rest) = match after_ticks.find('\n') {
        Some(nl) => (lead + 3 + nl + 1, &after_ticks[nl + 1..]),
        None => (lead + 3, after_ticks),
    };
    let rest = rest.strip_suffix("```").unwrap_or(rest);
    (rest, inner_start)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    base: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> RelaxedError {
        RelaxedError::Syntax {
            offset: self.base + self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b' ' | b'\t' | b'\n' | b'\r') = self.peek() {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn value(&mut self) -> Result<Value, RelaxedError> {
        let rest = self.rest();
        if rest.starts_with("...") || rest.starts_with('\u{2026}') || rest.starts_with("Ellipsis") {
            return Err(RelaxedError::Placeholder {
                offset: self.base + self.pos,
            });
        }
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'{') => self.nested(Self::object),
            Some(b'[') => self.nested(Self::array),
            Some(b'"') | Some(b'\'') => {
                let start = self.pos;
                let s = self.string()?;
                if is_placeholder_text(&s) {
                    return Err(RelaxedError::Placeholder {
                        offset: self.base + start,
                    });
                }
                Ok(Value::String(s))
            }
            Some(b'-') | Some(b'0'..=b'9') => self.number(),
            Some(_) => self.literal(),
        }
    }

    fn nested(
        &mut self,
        inner: fn(&mut Self) -> Result<Value, RelaxedError>,
    ) -> Result<Value, RelaxedError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.syntax("nesting too deep"));
        }
        let out = inner(self);
        self.depth -= 1;
        out
    }

    fn literal(&mut self) -> Result<Value, RelaxedError> {
        const LITERALS: [(&str, Value); 6] = [
            ("true", Value::Bool(true)),
            ("false", Value::Bool(false)),
            ("null", Value::Null),
            ("True", Value::Bool(true)),
            ("False", Value::Bool(false)),
            ("None", Value::Null),
        ];
        let rest = self.rest();
        for (word, value) in LITERALS {
            if let Some(after) = rest.strip_prefix(word) {
                let boundary = after
                    .bytes()
                    .next()
                    .is_none_or(|b| !(b.is_ascii_alphanumeric() || b == b'_'));
                if boundary {
                    self.pos += word.len();
                    return Ok(value);
                }
            }
        }
        Err(self.syntax("expected value"))
    }

    fn object(&mut self) -> Result<Value, RelaxedError> {
        self.pos += 1;
        let mut map = Map::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Value::Object(map));
                }
                Some(b'"') | Some(b'\'') => {}
                Some(_) if self.rest().starts_with("...") || self.rest().starts_with('\u{2026}') => {
                    return Err(RelaxedError::Placeholder {
                        offset: self.base + self.pos,
                    })
                }
                _ => return Err(self.syntax("expected string key or '}'")),
            }
            let key = self.string()?;
            self.skip_ws();
            if self.peek() != Some(b':') {
                return Err(self.syntax("expected ':'"));
            }
            self.pos += 1;
            self.skip_ws();
            let value = self.value()?;
            map.insert(key, value);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Value::Object(map));
                }
                _ => return Err(self.syntax("expected ',' or '}'")),
            }
        }
    }

    fn array(&mut self) -> Result<Value, RelaxedError> {
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(b']') {
                self.pos += 1;
                return Ok(Value::Array(items));
            }
            items.push(self.value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Value::Array(items));
                }
                _ => return Err(self.syntax("expected ',' or ']'")),
            }
        }
    }

    fn string(&mut self) -> Result<String, RelaxedError> {
        let quote = self.bytes[self.pos];
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(b) = self.peek() else {
                return Err(self.syntax("unterminated string"));
            };
            match b {
                _ if b == quote => {
                    self.pos += 1;
                    return Ok(out);
                }
                b'\\' => {
                    self.pos += 1;
                    self.escape(&mut out)?;
                }
                0x00..=0x1f => return Err(self.syntax("control character in string")),
                _ => {
                    // copy a run of plain characters at once
                    let start = self.pos;
                    while let Some(c) = self.peek() {
                        if c == quote || c == b'\\' || c < 0x20 {
                            break;
                        }
                        self.pos += 1;
                    }
                    out.push_str(&self.src[start..self.pos]);
                }
            }
        }
    }

    fn escape(&mut self, out: &mut String) -> Result<(), RelaxedError> {
        let Some(b) = self.peek() else {
            return Err(self.syntax("unterminated escape"));
        };
        self.pos += 1;
        match b {
            b'"' => out.push('"'),
            b'\'' => out.push('\''),
            b'\\' => out.push('\\'),
            b'/' => out.push('/'),
            b'b' => out.push('\u{8}'),
            b'f' => out.push('\u{c}'),
            b'n' => out.push('\n'),
            b'r' => out.push('\r'),
            b't' => out.push('\t'),
            b'u' => {
                let first = self.hex4()?;
                let c = if (0xD800..0xDC00).contains(&first) {
                    if !self.rest().starts_with("\\u") {
                        return Err(self.syntax("lone leading surrogate"));
                    }
                    self.pos += 2;
                    let second = self.hex4()?;
                    if !(0xDC00..0xE000).contains(&second) {
                        return Err(self.syntax("invalid trailing surrogate"));
                    }
                    let code = 0x10000 + ((first - 0xD800) << 10) + (second - 0xDC00);
                    char::from_u32(code)
                } else {
                    char::from_u32(first)
                };
                match c {
                    Some(c) => out.push(c),
                    None => return Err(self.syntax("invalid unicode escape")),
                }
            }
            _ => {
                self.pos -= 1;
                return Err(self.syntax("invalid escape"));
            }
        }
        Ok(())
    }

    fn hex4(&mut self) -> Result<u32, RelaxedError> {
        let digits = self
            .src
            .get(self.pos..self.pos + 4)
            .filter(|d| d.bytes().all(|b| b.is_ascii_hexdigit()))
            .ok_or_else(|| self.syntax("expected four hex digits"))?;
        self.pos += 4;
        Ok(u32::from_str_radix(digits, 16).expect("validated hex"))
    }

    fn number(&mut self) -> Result<Value, RelaxedError> {
        let start = self.pos;
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
        }
        match self.peek() {
            Some(b'0') => self.pos += 1,
            Some(b'1'..=b'9') => self.digits(),
            _ => return Err(self.syntax("invalid number")),
        }
        let mut integral = true;
        if self.peek() == Some(b'.') {
            integral = false;
            self.pos += 1;
            if !matches!(self.peek(), Some(b'0'..=b'9')) {
                return Err(self.syntax("expected digit after '.'"));
            }
            self.digits();
        }
        if let Some(b'e' | b'E') = self.peek() {
            integral = false;
            self.pos += 1;
            if let Some(b'+' | b'-') = self.peek() {
                self.pos += 1;
            }
            if !matches!(self.peek(), Some(b'0'..=b'9')) {
                return Err(self.syntax("expected exponent digits"));
            }
            self.digits();
        }
        let text = &self.src[start..self.pos];
        if integral {
            if negative {
                if let Ok(i) = text.parse::<i64>() {
                    // "-0" stays a float, as serde_json does
                    if i != 0 {
                        return Ok(Value::Number(i.into()));
                    }
                }
            } else if let Ok(u) = text.parse::<u64>() {
                return Ok(Value::Number(u.into()));
            }
        }
        let f: f64 = text.parse().map_err(|_| self.syntax("invalid number"))?;
        Number::from_f64(f)
            .map(Value::Number)
            .ok_or_else(|| RelaxedError::Syntax {
                offset: self.base + start,
                message: "number out of range".into(),
            })
    }

    fn digits(&mut self) {
        while let Some(b'0'..=b'9') = self.peek() {
            self.pos += 1;
        }
    }
}

/// True for string payloads that are only an ellipsis.
pub fn is_placeholder_text(s: &str) -> bool {
    matches!(s.trim(), "..." | "\u{2026}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn strict_call_list() {
        let v = parse_relaxed(r#"[{"name": "f", "arguments": {"a": 1}}]"#).unwrap();
        assert_eq!(v, json!([{"name": "f", "arguments": {"a": 1}}]));
    }

    #[test]
    fn python_literal_style() {
        let v = parse_relaxed("[{'name': 'f', 'arguments': {'a': True, 'b': None,},}]").unwrap();
        assert_eq!(v, json!([{"name": "f", "arguments": {"a": true, "b": null}}]));
    }

    #[test]
    fn fenced_payload() {
        let v = parse_relaxed("```json\n[{\"name\": \"f\", \"arguments\": {}}]\n```").unwrap();
        assert_eq!(v, json!([{"name": "f", "arguments": {}}]));
        let v = parse_relaxed("```\n{'name': 'g'}\n```").unwrap();
        assert_eq!(v, json!({"name": "g"}));
    }

    #[test]
    fn ellipsis_is_a_placeholder_failure() {
        for input in [
            r#"[{"name": "f", "arguments": {...}}]"#,
            r#"[{"name": "f", "arguments": {"a": "..."}}]"#,
            "[...]",
            r#"[{"name": "f"}, ...]"#,
            "[{'name': 'f', 'arguments': {'a': \u{2026}}}]",
        ] {
            let err = parse_relaxed(input).unwrap_err();
            assert!(err.is_placeholder(), "{input}: {err}");
        }
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let err = parse_relaxed(r#"[{"name": "f",, }]"#).unwrap_err();
        assert_eq!(err, RelaxedError::Syntax { offset: 14, message: "expected string key or '}'".into() });
        let err = parse_relaxed("```json\n[1 2]\n```").unwrap_err();
        assert_eq!(err.offset(), 11);
        assert!(!err.is_placeholder());
    }

    #[test]
    fn rejects_bare_identifiers_and_trailing_text() {
        assert!(parse_relaxed("[origin, destination]").is_err());
        assert!(parse_relaxed("{} extra").is_err());
        assert!(parse_relaxed("").is_err());
        assert!(parse_relaxed("Trueish").is_err());
    }

    #[test]
    fn numbers_follow_json_typing() {
        assert_eq!(parse_relaxed("7").unwrap(), json!(7));
        assert_eq!(parse_relaxed("-7").unwrap(), json!(-7));
        assert_eq!(parse_relaxed("7.5e1").unwrap(), json!(75.0));
        assert!(parse_relaxed("1e400").is_err());
        assert!(parse_relaxed("01").is_err());
        assert_eq!(parse_relaxed("18446744073709551616").unwrap(), json!(18446744073709551616.0));
    }

    #[test]
    fn escapes_in_both_quote_styles() {
        assert_eq!(parse_relaxed(r#"'it\'s'"#).unwrap(), json!("it's"));
        assert_eq!(parse_relaxed(r#""😀 \"q\"""#).unwrap(), json!("\u{1F600} \"q\""));
        assert!(parse_relaxed(r#""\ud83d""#).is_err());
    }

    #[test]
    fn container_edges() {
        assert!(parse_relaxed("[,]").is_err());
        assert!(parse_relaxed("[1,,]").is_err());
        assert!(parse_relaxed("{,}").is_err());
        assert_eq!(parse_relaxed(r#"{"a": 1, "a": 2}"#).unwrap(), json!({"a": 2}));
        assert!(parse_relaxed("Nonesuch").is_err());
        assert!(parse_relaxed("1e999").is_err());
        assert!(parse_relaxed("+1").is_err());
        assert!(parse_relaxed(&"[".repeat(129)).unwrap_err().to_string().contains("too deep"));
        assert_eq!(parse_relaxed("```\n[1]").unwrap(), json!([1]));
    }
}
