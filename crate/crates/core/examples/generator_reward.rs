//! Scores one generator completion under several probe outcomes and prints
//! the difficulty curve.
//!
//!     cargo run --example generator_reward

use toolplay::genreward::{difficulty_reward, score_generator, CurriculumInputs, DifficultyBand, GenRewardConfig};
use toolplay::parse::parse_generator_completion;

const COMPLETION: &str = r#"<think>plan</think>
<question>Book a table for 4 at Luigi's tonight.</question>
<available_tools>[{"name": "book_table", "description": "Reserve a table",
  "parameters": {"restaurant": {"type": "string"}, "party_size": {"type": "integer"}}, "required": ["restaurant", "party_size"]}]</available_tools>
<tool_call_answer>[{"name": "book_table", "arguments": {"restaurant": "Luigi's", "party_size": 4}}]</tool_call_answer>"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = GenRewardConfig::default();
    let parsed = parse_generator_completion(COMPLETION);
    println!("{:>6} {:>5} {:>4} {:>6} {:>6} {:>6} {:>7}", "succ", "judge", "fmt", "valid", "diff", "total", "norm");
    for (successes, judge_score) in [(0, 5), (1, 5), (2, 4), (4, 4), (6, 3), (8, 2)] {
        let p_succ = f64::from(successes) / 8.0;
        let b = score_generator(&parsed, Some(CurriculumInputs { p_succ, judge_score }), &cfg)?;
        println!(
            "{successes:>4}/8 {judge_score:>5} {:>4} {:>6.3} {:>6.3} {:>6.3} {:>7.3}",
            b.fmt, b.valid, b.diff, b.total_raw, b.total_normalized
        );
    }

    println!("\ndifficulty curve, K = 8");
    let band = DifficultyBand::default();
    for i in 0..=20 {
        let p = f64::from(i) / 20.0;
        let r = difficulty_reward(p, &band);
        println!("{p:>5.2} {r:>6.4} {}", "#".repeat((r * 40.0).round() as usize));
    }
    Ok(())
}
