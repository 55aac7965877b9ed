//! Generator rewards: format, validity and the curriculum signal
//! (band-pass difficulty plus judged semantic coherence).

use std::collections::BTreeMap;

use regex::RegexBuilder;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical;
use crate::parse::{GeneratedTask, GeneratorParse, ParseFlags, ToolCall, ToolSpec};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidityWeights {
    pub lambda_menu: f64,
    pub lambda_gold: f64,
    pub lambda_value: f64,
}

impl Default for ValidityWeights {
    fn default() -> Self {
        Self {
            lambda_menu: 0.4,
            lambda_gold: 0.4,
            lambda_value: 0.2,
        }
    }
}

impl ValidityWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let all = [self.lambda_menu, self.lambda_gold, self.lambda_value];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RewardError::Validation("validity weights must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyBand {
    pub p_low: f64,
    pub p_high: f64,
    pub sigma: f64,
    pub k_samples: u32,
}

impl Default for DifficultyBand {
    fn default() -> Self {
        Self {
            p_low: 0.25,
            p_high: 0.75,
            sigma: 0.12,
            k_samples: 8,
        }
    }
}

impl DifficultyBand {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(0.0 < self.p_low && self.p_low <= self.p_high && self.p_high < 1.0) {
            return Err(RewardError::Validation(format!(
                "band requires 0 < p_low <= p_high < 1, got [{}, {}]",
                self.p_low, self.p_high
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(RewardError::Validation("sigma must be positive".into()));
        }
        if self.k_samples == 0 {
            return Err(RewardError::Validation("k_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sum of the three generator format indicators, 0..=3.
pub fn format_reward(flags: &ParseFlags) -> u8 {
    u8::from(flags.tags_ok) + u8::from(flags.tools_json_ok) + u8::from(flags.gold_json_ok)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityChecks {
    pub menu: bool,
    pub required: bool,
    pub values: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub checks: ValidityChecks,
    pub score: f64,
}

/// Text a primitive value must appear as in the question. `None` for values
/// exempt from grounding (booleans, null, blank strings).
pub fn grounding_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(canonical::decimal(n)),
        _ => None,
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Case-insensitive occurrence of `needle` in `haystack` not flanked by word
/// characters on either side.
pub fn word_boundary_match(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let re = RegexBuilder::new(&regex::escape(needle))
        .case_insensitive(true)
        .build()
        .expect("escaped literal always compiles");
    let mut from = 0;
    while let Some(m) = re.find_at(haystack, from) {
        let before = haystack[..m.start()].chars().next_back();
        let after = haystack[m.end()..].chars().next();
        if !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char) {
            return true;
        }
        // step one char so overlapping candidates are still seen
        from = m.start() + haystack[m.start()..].chars().next().map_or(1, char::len_utf8);
        if from > haystack.len() {
            break;
        }
    }
    false
}

/// Validity checks over whatever parsed. Each check needs its inputs; a
/// missing input fails that check only. Multi-call answers must pass each
/// check on every call. A gold call naming a tool absent from the menu has no
/// required list to check against, so only the menu check fails for it.
pub fn validity_checks(
    question: Option<&str>,
    menu: Option<&[ToolSpec]>,
    gold: Option<&[ToolCall]>,
) -> ValidityChecks {
    let Some(gold) = gold.filter(|g| !g.is_empty()) else {
        return ValidityChecks::default();
    };
    let by_name: Option<BTreeMap<&str, &ToolSpec>> =
        menu.map(|m| m.iter().map(|t| (t.name.as_str(), t)).collect());

    let menu_ok = by_name
        .as_ref()
        .is_some_and(|tools| gold.iter().all(|c| tools.contains_key(c.name.as_str())));
    let required_ok = by_name.as_ref().is_some_and(|tools| {
        gold.iter().all(|c| match tools.get(c.name.as_str()) {
            Some(t) => t.required.iter().all(|r| c.arguments.contains_key(r)),
            None => true,
        })
    });
    let values_ok = question.is_some_and(|q| {
        gold.iter()
            .flat_map(|c| c.arguments.values())
            .filter_map(grounding_text)
            .all(|text| word_boundary_match(q, &text))
    });
    ValidityChecks {
        menu: menu_ok,
        required: required_ok,
        values: values_ok,
    }
}

pub fn validity_score(checks: &ValidityChecks, w: &ValidityWeights) -> f64 {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    w.lambda_menu * ind(checks.menu) + w.lambda_gold * ind(checks.required) + w.lambda_value * ind(checks.values)
}

pub fn validity_reward(task: &GeneratedTask, w: &ValidityWeights) -> ValidityReport {
    let checks = validity_checks(Some(&task.question), Some(&task.tools), Some(&task.gold_calls));
    ValidityReport {
        checks,
        score: validity_score(&checks, w),
    }
}

/// Band-pass difficulty shaping of the solver success rate.
pub fn difficulty_reward(p_succ: f64, band: &DifficultyBand) -> f64 {
    if p_succ < 1.0 / f64::from(band.k_samples) {
        return 0.0;
    }
    let two_var = 2.0 * band.sigma * band.sigma;
    if p_succ < band.p_low {
        (-(p_succ - band.p_low).powi(2) / two_var).exp()
    } else if p_succ > band.p_high {
        (-(p_succ - band.p_high).powi(2) / two_var).exp()
    } else {
        1.0
    }
}

pub fn semantic_reward(judge_score: u8) -> Result<f64, RewardError> {
    if !(1..=5).contains(&judge_score) {
        return Err(RewardError::Validation(format!(
            "judge score {judge_score} outside 1..=5"
        )));
    }
    Ok(f64::from(judge_score - 1) / 4.0)
}

pub fn curriculum_reward(diff: f64, sem: f64) -> f64 {
    diff + sem
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GenRewardConfig {
    #[serde(default)]
    pub validity: ValidityWeights,
    #[serde(default)]
    pub band: DifficultyBand,
}

impl GenRewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        self.validity.validate()?;
        self.band.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRewardBreakdown {
    pub fmt: u8,
    pub valid: f64,
    pub diff: f64,
    pub sem: f64,
    pub curr: f64,
    pub total_raw: f64,
    /// `(fmt/3 + valid + curr/2) / 3`, in `[0, 1]`.
    pub total_normalized: f64,
    pub p_succ: f64,
    pub checks: ValidityChecks,
}

impl GenRewardBreakdown {
    pub fn zero() -> Self {
        Self::assemble(0, 0.0, 0.0, 0.0, 0.0, ValidityChecks::default())
    }

    /// Builds a breakdown whose totals always agree with its components.
    pub fn assemble(fmt: u8, valid: f64, diff: f64, sem: f64, p_succ: f64, checks: ValidityChecks) -> Self {
        let curr = curriculum_reward(diff, sem);
        let total_raw = f64::from(fmt) + valid + curr;
        Self {
            fmt,
            valid,
            diff,
            sem,
            curr,
            total_raw,
            total_normalized: (f64::from(fmt) / 3.0 + valid + curr / 2.0) / 3.0,
            p_succ,
            checks,
        }
    }
}

/// Curriculum inputs for one completion: the probe success rate and the
/// judge score. Absent when the task did not parse end-to-end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumInputs {
    pub p_succ: f64,
    pub judge_score: u8,
}

/// Combines parse results with probe and judge outcomes. Curriculum terms
/// only apply when the task parsed completely, since probing needs gold
/// calls and the judge needs the full task.
pub fn score_generator(
    parsed: &GeneratorParse,
    curriculum: Option<CurriculumInputs>,
    cfg: &GenRewardConfig,
) -> Result<GenRewardBreakdown, RewardError> {
    let fmt = format_reward(&parsed.outcome.flags);
    let checks = validity_checks(
        parsed.blocks.question.as_deref(),
        parsed.tools.as_deref(),
        parsed.gold_calls.as_deref(),
    );
    let valid = validity_score(&checks, &cfg.validity);
    let (diff, sem, p_succ) = match (parsed.task(), curriculum) {
        (Some(_), Some(c)) => {
            if !(0.0..=1.0).contains(&c.p_succ) {
                return Err(RewardError::Validation(format!("p_succ {} outside [0, 1]", c.p_succ)));
            }
            (difficulty_reward(c.p_succ, &cfg.band), semantic_reward(c.judge_score)?, c.p_succ)
        }
        _ => (0.0, 0.0, 0.0),
    };
    Ok(GenRewardBreakdown::assemble(fmt, valid, diff, sem, p_succ, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_generator_completion;
    use serde_json::json;

    fn tool(name: &str, required: &[&str]) -> ToolSpec {
        serde_json::from_value(json!({
            "name": name, "description": "d",
            "parameters": required.iter().map(|r| (r.to_string(), json!({"type": "string", "description": ""}))).collect::<serde_json::Map<_, _>>(),
            "required": required,
        }))
        .unwrap()
    }

    #[test]
    fn band_values() {
        let b = DifficultyBand::default();
        assert_eq!(difficulty_reward(0.5, &b), 1.0);
        assert_eq!(difficulty_reward(0.0, &b), 0.0);
        assert!((difficulty_reward(1.0, &b) - 0.114197).abs() < 1e-4);
        assert!((difficulty_reward(0.125, &b) - 0.581268).abs() < 1e-4);
        assert_eq!(difficulty_reward(0.1249, &b), 0.0);
    }

    #[test]
    fn semantic_range() {
        assert_eq!(semantic_reward(5), Ok(1.0));
        assert_eq!(semantic_reward(1), Ok(0.0));
        assert_eq!(semantic_reward(3), Ok(0.5));
        assert!(semantic_reward(0).is_err());
        assert!(semantic_reward(6).is_err());
    }

    #[test]
    fn word_boundaries() {
        assert!(word_boundary_match("Book a flight to Paris", "Paris"));
        assert!(word_boundary_match("Book a flight to PARIS.", "paris"));
        assert!(!word_boundary_match("Book a flight to Paris", "Par"));
        assert!(word_boundary_match("costs $100 total", "$100"));
        assert!(!word_boundary_match("room 1001", "100"));
        assert!(word_boundary_match("aab ab", "ab"));
        assert!(word_boundary_match("2 guests", "2"));
    }

    #[test]
    fn absent_tool_scores_required_vacuously() {
        let menu = [tool("search", &["q"])];
        let gold = [ToolCall::from_json("book", json!({"city": "Paris"}))];
        let c = validity_checks(Some("Book in Paris"), Some(&menu), Some(&gold));
        assert_eq!(c, ValidityChecks { menu: false, required: true, values: true });
        assert!((validity_score(&c, &ValidityWeights::default()) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn booleans_and_nulls_are_exempt() {
        let menu = [tool("f", &[])];
        let gold = [ToolCall::from_json("f", json!({"flag": true, "x": null, "n": 3.0}))];
        let c = validity_checks(Some("give me 3"), Some(&menu), Some(&gold));
        assert!(c.values);
    }

    #[test]
    fn breakdown_sums() {
        let menu = r#"[{"name": "f", "description": "d", "parameters": {"city": {"type": "string", "description": "c"}}, "required": ["city"]}]"#;
        let text = format!("<think>t</think><question>Weather in Oslo</question><available_tools>{menu}</available_tools><tool_call_answer>[{{\"name\": \"f\", \"arguments\": {{\"city\": \"Oslo\"}}}}]</tool_call_answer>");
        let parsed = parse_generator_completion(&text);
        let b = score_generator(&parsed, Some(CurriculumInputs { p_succ: 0.5, judge_score: 5 }), &GenRewardConfig::default()).unwrap();
        assert_eq!((b.fmt, b.valid, b.diff, b.sem, b.curr, b.total_raw), (3, 1.0, 1.0, 1.0, 2.0, 6.0));
        assert_eq!(b.total_normalized, 1.0);
        assert_eq!(GenRewardBreakdown::zero().total_normalized, 0.0);
    }
}
