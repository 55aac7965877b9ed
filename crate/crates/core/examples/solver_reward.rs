//! Scores solver answers against a two-call gold and shows the greedy
//! matching behind each accuracy score.
//!
//!     cargo run --example solver_reward

use serde_json::json;
use toolplay::parse::ToolCall;
use toolplay::solreward::{score_solver_completion, SolverRewardConfig};

fn main() {
    let gold = vec![
        ToolCall::from_json("search_flights", json!({"origin": "SFO", "destination": "JFK", "date": "2024-05-01"})),
        ToolCall::from_json("book_flight", json!({"flight_id": "UA100"})),
    ];
    let answers = [
        ("exact", r#"[{"name": "search_flights", "arguments": {"origin": "SFO", "destination": "JFK", "date": "2024-05-01"}}, {"name": "book_flight", "arguments": {"flight_id": "UA100"}}]"#),
        ("reversed", r#"[{"name": "book_flight", "arguments": {"flight_id": "UA100"}}, {"name": "search_flights", "arguments": {"origin": "SFO", "destination": "JFK", "date": "2024-05-01"}}]"#),
        ("wrong date", r#"[{"name": "search_flights", "arguments": {"origin": "SFO", "destination": "JFK", "date": "May 1"}}, {"name": "book_flight", "arguments": {"flight_id": "UA100"}}]"#),
        ("only search", r#"[{"name": "search_flights", "arguments": {"origin": "SFO", "destination": "JFK", "date": "2024-05-01"}}]"#),
        ("one extra", r#"[{"name": "search_flights", "arguments": {"origin": "SFO", "destination": "JFK", "date": "2024-05-01"}}, {"name": "book_flight", "arguments": {"flight_id": "UA100"}}, {"name": "book_flight", "arguments": {"flight_id": "UA200"}}]"#),
        ("placeholder", r#"[{"name": "book_flight", "arguments": {...}}]"#),
    ];
    let cfg = SolverRewardConfig::default();
    for (label, answer) in answers {
        let completion = format!("<think>ok</think>\n<tool_call_answer>{answer}</tool_call_answer>");
        let (b, parsed) = score_solver_completion(&completion, &gold, &cfg);
        println!(
            "{label:<12} fmt {:.2} acc {:.4} (mean {:.4} x penalty {:.4}) total {:.4} norm {:.4}",
            b.fmt, b.acc, b.base_accuracy, b.penalty_factor, b.total_raw, b.total_normalized
        );
        if let Some(preds) = parsed.value.filter(|_| !parsed.flags.placeholder) {
            let report = toolplay::solreward::accuracy_reward(&preds, &gold, &cfg.accuracy);
            for m in report.matches {
                let score = m.pair.map_or(0.0, |p| p.score);
                println!("    gold {} <- pred {:?} score {score:.2}", m.gold_index, m.pred_index);
            }
        }
    }
}
