//! Grounded task specifications `(domain, context type, menu size, gold-call
//! count)`: seeded sampling from a user-weighted distribution, and rendering
//! of the generator, solver and judge prompts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::parse::{ToolCall, ToolSpec};

#[derive(Debug, Error, PartialEq)]
pub enum TaskSpecError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextType {
    SingleTurn,
    MultiTurn,
}

impl ContextType {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextType::SingleTurn => "single_turn",
            ContextType::MultiTurn => "multi_turn",
        }
    }
}

impl fmt::Display for ContextType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The control tuple handed to the generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub domain: String,
    pub context_type: ContextType,
    pub tool_menu_size: u32,
    pub num_gold_calls: u32,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), TaskSpecError> {
        let bad = |m: String| Err(TaskSpecError::Validation(m));
        if self.domain.is_empty() {
            return bad("empty domain".into());
        }
        if self.tool_menu_size == 0 || self.num_gold_calls == 0 {
            return bad("menu size and gold-call count must be positive".into());
        }
        if self.context_type == ContextType::MultiTurn && self.num_gold_calls != 1 {
            return bad(format!("multi-turn specs take exactly one gold call, got {}", self.num_gold_calls));
        }
        if self.num_gold_calls > 1 && !(3..=5).contains(&self.tool_menu_size) {
            return bad(format!("multi-call specs need a menu of 3-5 tools, got {}", self.tool_menu_size));
        }
        if self.num_gold_calls == 1 && !(2..=8).contains(&self.tool_menu_size) {
            return bad(format!("single-call specs need a menu of 2-8 tools, got {}", self.tool_menu_size));
        }
        Ok(())
    }
}

pub const DEFAULT_DOMAINS: [&str; 32] = [
    "finance",
    "healthcare",
    "productivity",
    "retail_ecommerce",
    "scheduling",
    "database",
    "cloud_infrastructure",
    "system",
    "programming",
    "geolocation",
    "logistics",
    "communication",
    "iot",
    "cybersecurity",
    "insurance",
    "legal",
    "news",
    "weather",
    "sports",
    "entertainment",
    "education",
    "real_estate",
    "food_ordering",
    "translation",
    "utilities",
    "government",
    "memory_management",
    "web_search",
    "social_media",
    "math",
    "vehicle_control",
    "travel",
];

/// User-defined sampling distribution. Domain weights are unnormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecDistribution {
    pub domain_weights: BTreeMap<String, f64>,
    pub p_multi_turn: f64,
    pub p_two_calls: f64,
    /// Probability of the small (2-4) menu bucket when one gold call is drawn.
    pub p_small_menu: f64,
}

impl Default for SpecDistribution {
    fn default() -> Self {
        Self {
            domain_weights: DEFAULT_DOMAINS.iter().map(|d| (d.to_string(), 0.03125)).collect(),
            p_multi_turn: 0.1,
            p_two_calls: 0.2,
            p_small_menu: 0.5,
        }
    }
}

impl SpecDistribution {
    pub fn single_domain(domain: &str) -> Self {
        Self {
            domain_weights: BTreeMap::from([(domain.to_string(), 1.0)]),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TaskSpecError> {
        for (name, p) in [
            ("p_multi_turn", self.p_multi_turn),
            ("p_two_calls", self.p_two_calls),
            ("p_small_menu", self.p_small_menu),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(TaskSpecError::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if let Some((d, w)) = self.domain_weights.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(TaskSpecError::Config(format!("weight for `{d}` must be a non-negative real, got {w}")));
        }
        if !self.domain_weights.values().any(|w| *w > 0.0) {
            return Err(TaskSpecError::Config("all domain weights are zero".into()));
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<SpecSampler, TaskSpecError> {
        self.validate()?;
        let domains: Vec<String> = self.domain_weights.keys().cloned().collect();
        let index = WeightedIndex::new(self.domain_weights.values().copied())
            .map_err(|e| TaskSpecError::Config(e.to_string()))?;
        Ok(SpecSampler {
            domains,
            index,
            dist: self.clone(),
        })
    }
}

/// A validated distribution ready for repeated draws.
#[derive(Debug, Clone)]
pub struct SpecSampler {
    domains: Vec<String>,
    index: WeightedIndex<f64>,
    dist: SpecDistribution,
}

impl SpecSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskSpec {
        let domain = self.domains[self.index.sample(rng)].clone();
        let context_type = if rng.random_bool(self.dist.p_multi_turn) {
            ContextType::MultiTurn
        } else {
            ContextType::SingleTurn
        };
        let num_gold_calls = match context_type {
            ContextType::MultiTurn => 1,
            ContextType::SingleTurn if rng.random_bool(self.dist.p_two_calls) => 2,
            ContextType::SingleTurn => 1,
        };
        let tool_menu_size = if num_gold_calls > 1 {
            rng.random_range(3..=5)
        } else if rng.random_bool(self.dist.p_small_menu) {
            rng.random_range(2..=4)
        } else {
            rng.random_range(5..=8)
        };
        TaskSpec {
            domain,
            context_type,
            tool_menu_size,
            num_gold_calls,
        }
    }

    /// Draw number `index` under `master_seed`. Each index reads its own
    /// ChaCha stream, so a draw does not depend on batch size or on which
    /// other indices were drawn.
    pub fn draw(&self, master_seed: u64, index: u64) -> TaskSpec {
        self.sample(&mut draw_rng(master_seed, index))
    }
}

pub fn draw_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

pub fn sample_spec(dist: &SpecDistribution, seed: u64) -> Result<TaskSpec, TaskSpecError> {
    Ok(dist.sampler()?.draw(seed, 0))
}

/// Draws `count` specs: draw `i` is `sampler.draw(master_seed, i)`.
pub fn sample_specs(
    dist: &SpecDistribution,
    master_seed: u64,
    count: usize,
) -> Result<Vec<TaskSpec>, TaskSpecError> {
    let sampler = dist.sampler()?;
    Ok((0..count as u64).map(|i| sampler.draw(master_seed, i)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// A prompt template pre-split into literal text and slots, so substituted
/// values are never rescanned for slot markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

static BRACED_SLOT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex"));

impl Template {
    /// `{slot}` markers. Any slot outside `declared` is an error; JSON braces
    /// such as `{"name": ...}` are not slot markers.
    pub fn braced(text: &str, declared: &[&str]) -> Result<Self, TaskSpecError> {
        let mut segments = Vec::new();
        let mut last = 0;
        for caps in BRACED_SLOT.captures_iter(text) {
            let whole = caps.get(0).expect("group 0");
            let name = &caps[1];
            if !declared.contains(&name) {
                return Err(TaskSpecError::Template(format!("unknown slot `{{{name}}}`")));
            }
            segments.push(Segment::Text(text[last..whole.start()].to_string()));
            segments.push(Segment::Slot(name.to_string()));
            last = whole.end();
        }
        segments.push(Segment::Text(text[last..].to_string()));
        Ok(Self { segments })
    }

    /// Bare uppercase tokens such as `USER_QUERY`.
    pub fn bare(text: &str, tokens: &[&str]) -> Result<Self, TaskSpecError> {
        let pattern = tokens
            .iter()
            .map(|t| format!(r"\b{}\b", regex::escape(t)))
            .collect::<Vec<_>>()
            .join("|");
        let re = Regex::new(&pattern).map_err(|e| TaskSpecError::Template(e.to_string()))?;
        let mut segments = Vec::new();
        let mut last = 0;
        for m in re.find_iter(text) {
            segments.push(Segment::Text(text[last..m.start()].to_string()));
            segments.push(Segment::Slot(m.as_str().to_string()));
            last = m.end();
        }
        segments.push(Segment::Text(text[last..].to_string()));
        Ok(Self { segments })
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(name) => Some(name.as_str()),
            Segment::Text(_) => None,
        })
    }

    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TaskSpecError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => {
                    let (_, v) = values
                        .iter()
                        .find(|(k, _)| k == name)
                        .ok_or_else(|| TaskSpecError::Template(format!("no value for slot `{name}`")))?;
                    out.push_str(v);
                }
            }
        }
        Ok(out)
    }
}

pub const GENERATOR_SLOTS: [&str; 4] = ["domain", "context_type", "tool_menu_size", "num_calls"];
pub const SOLVER_SLOTS: [&str; 2] = ["USER_QUERY", "TOOL_MENU"];
pub const JUDGE_SLOTS: [&str; 3] = ["question", "tools", "tool_calls"];

pub const DEFAULT_GENERATOR_TEMPLATE: &str = include_str!("../assets/generator_prompt.txt");
pub const DEFAULT_SOLVER_TEMPLATE: &str = include_str!("../assets/solver_prompt.txt");
pub const DEFAULT_JUDGE_TEMPLATE: &str = include_str!("../assets/judge_prompt.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub generator: Template,
    pub solver: Template,
    pub judge: Template,
}

impl Default for PromptBundle {
    fn default() -> Self {
        Self::from_texts(DEFAULT_GENERATOR_TEMPLATE, DEFAULT_SOLVER_TEMPLATE, DEFAULT_JUDGE_TEMPLATE)
            .expect("bundled templates are valid")
    }
}

impl PromptBundle {
    pub fn from_texts(generator: &str, solver: &str, judge: &str) -> Result<Self, TaskSpecError> {
        Ok(Self {
            generator: Template::braced(generator, &GENERATOR_SLOTS)?,
            solver: Template::bare(solver, &SOLVER_SLOTS)?,
            judge: Template::braced(judge, &JUDGE_SLOTS)?,
        })
    }

    /// Loads `generator_prompt.txt`, `solver_prompt.txt` and `judge_prompt.txt`
    /// from `dir`, falling back to the bundled text for any that are absent.
    pub fn from_dir(dir: &Path) -> Result<Self, TaskSpecError> {
        let read = |name: &str, fallback: &str| -> Result<String, TaskSpecError> {
            let path = dir.join(name);
            if path.exists() {
                std::fs::read_to_string(&path)
                    .map_err(|e| TaskSpecError::Template(format!("{}: {e}", path.display())))
            } else {
                Ok(fallback.to_string())
            }
        };
        Self::from_texts(
            &read("generator_prompt.txt", DEFAULT_GENERATOR_TEMPLATE)?,
            &read("solver_prompt.txt", DEFAULT_SOLVER_TEMPLATE)?,
            &read("judge_prompt.txt", DEFAULT_JUDGE_TEMPLATE)?,
        )
    }
}

pub fn render_generator_prompt(spec: &TaskSpec, bundle: &PromptBundle) -> Result<String, TaskSpecError> {
    let m = spec.tool_menu_size.to_string();
    let n = spec.num_gold_calls.to_string();
    bundle.generator.render(&[
        ("domain", &spec.domain),
        ("context_type", spec.context_type.as_str()),
        ("tool_menu_size", &m),
        ("num_calls", &n),
    ])
}

/// Canonical (sorted-key, compact) JSON list of the menu, as shown to the solver.
pub fn menu_json(menu: &[ToolSpec]) -> String {
    canonical::to_string(menu)
}

pub fn render_solver_prompt(
    question: &str,
    menu: &[ToolSpec],
    bundle: &PromptBundle,
) -> Result<String, TaskSpecError> {
    if menu.is_empty() {
        return Err(TaskSpecError::Validation("tool menu is empty".into()));
    }
    bundle
        .solver
        .render(&[("USER_QUERY", question), ("TOOL_MENU", &menu_json(menu))])
}

pub fn render_judge_prompt(
    question: &str,
    menu: &[ToolSpec],
    gold_calls: &[ToolCall],
    bundle: &PromptBundle,
) -> Result<String, TaskSpecError> {
    bundle.judge.render(&[
        ("question", question),
        ("tools", &menu_json(menu)),
        ("tool_calls", &canonical::to_string(gold_calls)),
    ])
}

static CONTROL_LINES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?m)^- Domain: (?P<d>.+)\n- Context type: (?P<c>\S+).*\n- Number of available tools: (?P<m>\d+).*\n- Number of gold tool calls: (?P<n>\d+)",
    )
    .expect("static regex")
});

/// Reads the control-spec block back out of a rendered generator prompt.
pub fn extract_control_spec(prompt: &str) -> Option<TaskSpec> {
    let caps = CONTROL_LINES.captures(prompt)?;
    let context_type = match &caps["c"] {
        "single_turn" => ContextType::SingleTurn,
        "multi_turn" => ContextType::MultiTurn,
        _ => return None,
    };
    Some(TaskSpec {
        domain: caps["d"].to_string(),
        context_type,
        tool_menu_size: caps["m"].parse().ok()?,
        num_gold_calls: caps["n"].parse().ok()?,
    })
}
