//! Parses a generator completion and several solver answers written in the
//! loose styles models actually produce.
//!
//!     cargo run --example parse_completion

use toolplay::canonical;
use toolplay::parse::{parse_generator_completion, parse_solver_completion};

const GENERATED: &str = r#"<think>One call is enough.</think>
<question>What's the weather in Paris in celsius?</question>
<available_tools>[{"name": "get_weather", "description": "Current weather",
  "parameters": {"city": {"type": "string"}, "unit": {"type": "string"}}, "required": ["city"]}]</available_tools>
<tool_call_answer>[{"name": "get_weather", "arguments": {"city": "Paris", "unit": "celsius"}}]</tool_call_answer>"#;

fn main() {
    let g = parse_generator_completion(GENERATED);
    println!("generator flags {:?}", g.outcome.flags);
    if let Some(task) = g.task() {
        println!("question: {}", task.question);
        println!("menu: {}", task.tools.iter().map(|t| t.name.as_str()).collect::<Vec<_>>().join(", "));
        println!("gold: {}", canonical::to_string(&task.gold_calls));
    }

    let answers = [
        r#"[{"name": "get_weather", "arguments": {"city": "Paris"}}]"#,
        r#"[{'name': 'get_weather', 'arguments': {'city': 'Paris', 'verbose': True}}]"#,
        "```json\n{\"name\": \"get_weather\", \"arguments\": {\"city\": \"Paris\"}}\n```",
        r#"{"tool_calls": [{"function": {"name": "get_weather", "arguments": "{\"city\": \"Paris\"}"}}]}"#,
        r#"{"name": "get_weather", "city": "Paris"}"#,
        r#"[{"name": "get_weather", "arguments": {...}}]"#,
        "no idea",
    ];
    for a in answers {
        let out = parse_solver_completion(&format!("<tool_call_answer>{a}</tool_call_answer>"));
        let calls = out.value.as_ref().map_or("-".to_string(), |c| canonical::to_string(c));
        println!("\n{a}\n  flags {:?}\n  calls {calls}", out.flags);
        for d in &out.diagnostics {
            println!("  note: {d}");
        }
    }
}
