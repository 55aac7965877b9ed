//! Dataset construction from generator output: candidate synthesis, dedup by
//! canonical signature, solver cross-verification, pass@K bucketing,
//! domain-balanced selection and easy-to-hard curriculum ordering.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::canonical;
use crate::gateway::{Gateway, GatewayError, ProbeResult};
use crate::genreward::DifficultyBand;
use crate::parse::{parse_generator_completion, GeneratedTask, ToolCall, ToolSpec};
use crate::taskspec::{render_generator_prompt, SpecDistribution, TaskSpec, TaskSpecError};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("curation error: {0}")]
    Empty(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Spec(#[from] TaskSpecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Easy,
    Medium,
    Hard,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::Easy, Bucket::Medium, Bucket::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Easy => "easy",
            Bucket::Medium => "medium",
            Bucket::Hard => "hard",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Bucket::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown bucket `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketThresholds {
    /// `p_pass >= easy_min` is easy.
    pub easy_min: f64,
    /// `medium_min <= p_pass < easy_min` is medium; below is hard.
    pub medium_min: f64,
}

impl Default for BucketThresholds {
    fn default() -> Self {
        Self {
            easy_min: 0.75,
            medium_min: 0.25,
        }
    }
}

pub fn bucketize(p_pass: f64, t: &BucketThresholds) -> Bucket {
    if p_pass >= t.easy_min {
        Bucket::Easy
    } else if p_pass >= t.medium_min {
        Bucket::Medium
    } else {
        Bucket::Hard
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketMix {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

impl Default for BucketMix {
    fn default() -> Self {
        Self {
            easy: 1.0 / 3.0,
            medium: 1.0 / 3.0,
            hard: 1.0 / 3.0,
        }
    }
}

impl BucketMix {
    fn get(&self, b: Bucket) -> f64 {
        match b {
            Bucket::Easy => self.easy,
            Bucket::Medium => self.medium,
            Bucket::Hard => self.hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub pool_size: usize,
    pub output_size: usize,
    pub agreement_threshold: f64,
    pub thresholds: BucketThresholds,
    /// Largest share of the output any one domain may take. `None` means
    /// twice the uniform share over the domains present.
    pub domain_cap: Option<f64>,
    pub bucket_mix: BucketMix,
    /// Share of each curriculum segment drawn from its dominant bucket.
    pub segment_dominant_share: f64,
    /// Derive pass@K from the verification samples instead of drawing a
    /// second probe batch.
    pub reuse_verification_probe: bool,
    pub verify_samples: u32,
    pub band: DifficultyBand,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            pool_size: 10_000,
            output_size: 2_000,
            agreement_threshold: 0.5,
            thresholds: BucketThresholds::default(),
            domain_cap: None,
            bucket_mix: BucketMix::default(),
            segment_dominant_share: 0.8,
            reuse_verification_probe: true,
            verify_samples: 8,
            band: DifficultyBand::default(),
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let bad = |m: &str| Err(CurationError::Config(m.to_string()));
        if self.output_size == 0 {
            return bad("output_size must be positive");
        }
        if self.output_size > self.pool_size {
            return bad("output_size must not exceed pool_size");
        }
        let mix = [self.bucket_mix.easy, self.bucket_mix.medium, self.bucket_mix.hard];
        if mix.iter().any(|p| !(0.0..=1.0).contains(p)) || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("bucket_mix proportions must lie in [0, 1] and sum to 1");
        }
        if !(0.0..=1.0).contains(&self.agreement_threshold) {
            return bad("agreement_threshold must lie in [0, 1]");
        }
        let t = self.thresholds;
        if !(0.0 <= t.medium_min && t.medium_min <= t.easy_min && t.easy_min <= 1.0) {
            return bad("bucket thresholds must satisfy 0 <= medium_min <= easy_min <= 1");
        }
        if self.domain_cap.is_some_and(|c| !(c > 0.0 && c <= 1.0)) {
            return bad("domain_cap must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.segment_dominant_share) {
            return bad("segment_dominant_share must lie in [0, 1]");
        }
        if self.verify_samples == 0 {
            return bad("verify_samples must be positive");
        }
        self.band.validate().map_err(|e| CurationError::Config(e.to_string()))
    }
}

/// One raw generator sample and the spec that prompted it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub index: u64,
    pub spec: TaskSpec,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: u64,
    pub spec: TaskSpec,
    pub task: GeneratedTask,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedRecord {
    pub task: GeneratedTask,
    pub spec: TaskSpec,
    pub signature: String,
    pub agreement: f64,
    pub p_pass: f64,
    pub bucket: Bucket,
    pub curriculum_rank: usize,
}

/// The dataset line: task content plus curation metadata, keys sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetLine {
    pub agreement: f64,
    pub bucket: Bucket,
    pub curriculum_rank: usize,
    pub domain: String,
    pub gold_calls: Vec<ToolCall>,
    pub p_pass: f64,
    pub question: String,
    pub signature: String,
    pub spec: TaskSpec,
    pub tools: Vec<ToolSpec>,
}

impl From<&CuratedRecord> for DatasetLine {
    fn from(r: &CuratedRecord) -> Self {
        Self {
            agreement: r.agreement,
            bucket: r.bucket,
            curriculum_rank: r.curriculum_rank,
            domain: r.spec.domain.clone(),
            gold_calls: r.task.gold_calls.clone(),
            p_pass: r.p_pass,
            question: r.task.question.clone(),
            signature: r.signature.clone(),
            spec: r.spec.clone(),
            tools: r.task.tools.clone(),
        }
    }
}

fn collapse_lower(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Content hash over the normalized question, the sorted tool names and the
/// gold calls (as a multiset, so call order does not matter).
pub fn signature(task: &GeneratedTask) -> String {
    let tools: BTreeSet<&str> = task.tools.iter().map(|t| t.name.as_str()).collect();
    let mut gold: Vec<String> = task.gold_calls.iter().map(ToolCall::canonical_json).collect();
    gold.sort();
    let key = json!({
        "gold_calls": gold,
        "question": collapse_lower(&task.question),
        "tools": tools,
    });
    canonical::sha256_hex(canonical::to_string(&key))
}

/// Keeps the first task for each signature.
pub fn dedup<T: Clone>(pool: &[T], sig: impl Fn(&T) -> String) -> Vec<T> {
    let mut seen = BTreeSet::new();
    pool.iter().filter(|t| seen.insert(sig(t))).cloned().collect()
}

pub fn dedup_tasks(pool: &[GeneratedTask]) -> Vec<GeneratedTask> {
    dedup(pool, signature)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub agreement: f64,
    pub p_pass: f64,
    pub keep: bool,
}

/// Samples the solver on the task and keeps it when agreement with gold
/// reaches the threshold (closed bound).
pub fn cross_verify(task: &GeneratedTask, gateway: &Gateway, cfg: &CurationConfig) -> Result<Verification, GatewayError> {
    let verify = gateway.probe_solver_from(&task.question, &task.tools, &task.gold_calls, cfg.verify_samples, 0)?;
    let p_pass = if cfg.reuse_verification_probe {
        verify.p_succ
    } else {
        let k = cfg.band.k_samples;
        let fresh: ProbeResult = gateway.probe_solver_from(
            &task.question,
            &task.tools,
            &task.gold_calls,
            k,
            u64::from(cfg.verify_samples),
        )?;
        fresh.p_succ
    };
    Ok(Verification {
        agreement: verify.p_succ,
        p_pass,
        keep: verify.p_succ >= cfg.agreement_threshold,
    })
}

/// Integer targets summing to `total`, proportional to `weights`, by largest
/// remainder with ties going to the earlier entry.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let short = total.saturating_sub(out.iter().sum());
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub requested: usize,
    pub selected: usize,
    pub bucket_targets: BTreeMap<Bucket, usize>,
    pub bucket_counts: BTreeMap<Bucket, usize>,
    pub domain_cap: usize,
    pub warnings: Vec<String>,
}

/// Per-bucket picker cycling over domains so no single domain dominates.
struct DomainRoundRobin {
    queues: Vec<(String, VecDeque<usize>)>,
    cursor: usize,
}

impl DomainRoundRobin {
    fn new(items: Vec<(String, usize)>) -> Self {
        let mut by_domain: BTreeMap<String, VecDeque<usize>> = BTreeMap::new();
        for (domain, idx) in items {
            by_domain.entry(domain).or_default().push_back(idx);
        }
        Self {
            queues: by_domain.into_iter().collect(),
            cursor: 0,
        }
    }

    /// Next item from a domain still under `cap`, advancing the cursor.
    fn next(&mut self, taken: &BTreeMap<String, usize>, cap: usize) -> Option<(String, usize)> {
        let n = self.queues.len();
        for step in 0..n {
            let i = (self.cursor + step) % n;
            let (domain, queue) = &mut self.queues[i];
            if queue.is_empty() || taken.get(domain.as_str()).copied().unwrap_or(0) >= cap {
                continue;
            }
            let idx = queue.pop_front().expect("checked non-empty");
            self.cursor = (i + 1) % n;
            return Some((domain.clone(), idx));
        }
        None
    }
}

fn shuffle_rng(seed: u64, bucket: Bucket) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0A7_E5E1_EC70_0000);
    rng.set_stream(bucket.index() as u64);
    rng
}

fn difficulty_order(a: &CuratedRecord, b: &CuratedRecord) -> std::cmp::Ordering {
    b.p_pass
        .total_cmp(&a.p_pass)
        .then(a.bucket.cmp(&b.bucket))
        .then_with(|| a.signature.cmp(&b.signature))
}

/// Picks up to `output_size` records honoring the domain cap and bucket mix,
/// then orders them into a curriculum. Returns the ordered records with
/// `curriculum_rank` set to their position.
pub fn select_and_order(
    verified: &[CuratedRecord],
    cfg: &CurationConfig,
    seed: u64,
) -> Result<(Vec<CuratedRecord>, SelectionReport), CurationError> {
    if verified.is_empty() {
        return Err(CurationError::Empty("no verified records to select from".into()));
    }
    let mut report = SelectionReport {
        requested: cfg.output_size,
        ..SelectionReport::default()
    };
    let domains: BTreeSet<&str> = verified.iter().map(|r| r.spec.domain.as_str()).collect();
    let cap_share = cfg.domain_cap.unwrap_or(2.0 / domains.len() as f64).min(1.0);
    let cap = ((cap_share * cfg.output_size as f64 + 1e-9).floor() as usize).max(1);
    report.domain_cap = cap;

    let mut pickers: Vec<DomainRoundRobin> = Bucket::ALL
        .iter()
        .map(|&b| {
            let mut members: Vec<usize> = (0..verified.len()).filter(|&i| verified[i].bucket == b).collect();
            members.shuffle(&mut shuffle_rng(seed, b));
            DomainRoundRobin::new(members.into_iter().map(|i| (verified[i].spec.domain.clone(), i)).collect())
        })
        .collect();

    let weights: Vec<f64> = Bucket::ALL.iter().map(|&b| cfg.bucket_mix.get(b)).collect();
    let targets = largest_remainder(cfg.output_size, &weights);
    for (b, t) in Bucket::ALL.iter().zip(&targets) {
        report.bucket_targets.insert(*b, *t);
    }

    let mut taken: BTreeMap<String, usize> = BTreeMap::new();
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); 3];
    let mut take = |bucket: usize, want: usize, chosen: &mut Vec<Vec<usize>>, taken: &mut BTreeMap<String, usize>| {
        let mut got = 0;
        while got < want {
            let Some((domain, idx)) = pickers[bucket].next(taken, cap) else { break };
            *taken.entry(domain).or_default() += 1;
            chosen[bucket].push(idx);
            got += 1;
        }
        got
    };
    for (bi, &t) in targets.iter().enumerate() {
        let got = take(bi, t, &mut chosen, &mut taken);
        if got < t {
            report.warnings.push(format!(
                "bucket {}: wanted {t}, found {got}; shortfall moved to other buckets",
                Bucket::ALL[bi]
            ));
        }
    }
    // hand shortfall to mixed-in buckets with spare supply, one record at a time
    loop {
        let total: usize = chosen.iter().map(Vec::len).sum();
        if total >= cfg.output_size {
            break;
        }
        let mut progressed = false;
        for bi in 0..3 {
            if chosen.iter().map(Vec::len).sum::<usize>() >= cfg.output_size {
                break;
            }
            if weights[bi] > 0.0 {
                progressed |= take(bi, 1, &mut chosen, &mut taken) == 1;
            }
        }
        if !progressed {
            break;
        }
    }

    let selected: Vec<CuratedRecord> = chosen.iter().flatten().map(|&i| verified[i].clone()).collect();
    report.selected = selected.len();
    if selected.len() < cfg.output_size {
        report.warnings.push(format!(
            "supply shortage: selected {} of {} requested",
            selected.len(),
            cfg.output_size
        ));
    }
    for b in Bucket::ALL {
        report
            .bucket_counts
            .insert(b, selected.iter().filter(|r| r.bucket == b).count());
    }
    for w in &report.warnings {
        tracing::warn!("{w}");
    }
    let (ordered, fallback) = curriculum_order(selected, cfg.segment_dominant_share);
    if fallback {
        report
            .warnings
            .push("segment mixing broke difficulty monotonicity; used plain difficulty order".into());
    }
    Ok((ordered, report))
}

/// Start and end offsets of the three curriculum segments over `n` records.
pub fn segment_bounds(n: usize) -> [usize; 4] {
    [0, n / 3, 2 * n / 3, n]
}

/// Mean `p_pass` of each non-empty curriculum segment.
pub fn segment_means(records: &[CuratedRecord]) -> Vec<f64> {
    segment_bounds(records.len())
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| records[w[0]..w[1]].iter().map(|r| r.p_pass).sum::<f64>() / (w[1] - w[0]) as f64)
        .collect()
}

/// Thirds of the output, each led by one bucket (easy, medium, hard in turn).
/// A segment takes `dominant_share` of its slots from its bucket, easiest
/// first, and fills the rest with the easiest records left in other buckets;
/// the last segment takes everything left. Each segment is then sorted from
/// easy to hard. If the segment means come out increasing, the whole list is
/// sorted by difficulty instead and the second value is `true`.
pub fn curriculum_order(mut records: Vec<CuratedRecord>, dominant_share: f64) -> (Vec<CuratedRecord>, bool) {
    records.sort_by(difficulty_order);
    let n = records.len();
    let bounds = segment_bounds(n);
    let mut left: Vec<Option<CuratedRecord>> = records.iter().cloned().map(Some).collect();
    let mut out: Vec<CuratedRecord> = Vec::with_capacity(n);
    let mut segment_means = Vec::new();

    for (seg, bucket) in Bucket::ALL.iter().enumerate() {
        let size = bounds[seg + 1] - bounds[seg];
        let mut segment: Vec<CuratedRecord> = Vec::with_capacity(size);
        let mut pull = |pred: &dyn Fn(&CuratedRecord) -> bool, limit: usize, segment: &mut Vec<CuratedRecord>| {
            for slot in left.iter_mut() {
                if segment.len() >= limit {
                    break;
                }
                if slot.as_ref().is_some_and(pred) {
                    segment.push(slot.take().expect("checked"));
                }
            }
        };
        if seg == 2 {
            pull(&|_| true, size, &mut segment);
        } else {
            let dominant = ((dominant_share * size as f64).round() as usize).min(size);
            pull(&|r| r.bucket == *bucket, dominant, &mut segment);
            pull(&|r| r.bucket != *bucket, size, &mut segment);
            pull(&|_| true, size, &mut segment);
        }
        segment.sort_by(difficulty_order);
        if !segment.is_empty() {
            segment_means.push(segment.iter().map(|r| r.p_pass).sum::<f64>() / segment.len() as f64);
        }
        out.extend(segment);
    }

    let monotone = segment_means.windows(2).all(|w| w[1] <= w[0]);
    let mut out = if monotone { out } else { records };
    for (rank, r) in out.iter_mut().enumerate() {
        r.curriculum_rank = rank;
    }
    (out, !monotone)
}

/// Synthesizes `count` candidates: draw `i` samples its spec from stream `i`
/// and asks the generator once at rollout settings.
pub fn generate_pool(
    dist: &SpecDistribution,
    gateway: &Gateway,
    seed: u64,
    count: usize,
) -> Result<Vec<PoolEntry>, CurationError> {
    let sampler = dist.sampler()?;
    let jobs: Vec<(u64, TaskSpec)> = (0..count as u64).map(|i| (i, sampler.draw(seed, i))).collect();
    let results = gateway.map_parallel(&jobs, |(i, spec)| -> Result<PoolEntry, CurationError> {
        let prompt = render_generator_prompt(spec, gateway.prompts())?;
        Ok(PoolEntry {
            index: *i,
            spec: spec.clone(),
            completion: gateway.rollout(&prompt, *i)?,
        })
    });
    results.into_iter().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub pool: usize,
    pub unparsed: usize,
    pub duplicates: usize,
    pub verify_errors: usize,
    pub below_agreement: usize,
    pub verified: usize,
    pub verified_buckets: BTreeMap<Bucket, usize>,
    pub selection: SelectionReport,
    pub diagnostics: Vec<String>,
}

/// Parses and dedups the pool, keeping only complete generator outputs.
pub fn parse_pool(pool: &[PoolEntry], report: &mut CurationReport) -> Vec<Candidate> {
    report.pool = pool.len();
    let parsed: Vec<Candidate> = pool
        .iter()
        .filter_map(|e| {
            let p = parse_generator_completion(&e.completion);
            let task = p.outcome.value?;
            Some(Candidate {
                index: e.index,
                spec: e.spec.clone(),
                signature: signature(&task),
                task,
            })
        })
        .collect();
    report.unparsed = pool.len() - parsed.len();
    let unique = dedup(&parsed, |c| c.signature.clone());
    report.duplicates = parsed.len() - unique.len();
    unique
}

/// Cross-verifies candidates in parallel and buckets the survivors.
pub fn verify_candidates(
    candidates: &[Candidate],
    gateway: &Gateway,
    cfg: &CurationConfig,
    report: &mut CurationReport,
) -> Vec<CuratedRecord> {
    let results = gateway.map_parallel(candidates, |c| cross_verify(&c.task, gateway, cfg));
    let mut verified = Vec::new();
    for (c, r) in candidates.iter().zip(results) {
        match r {
            Err(e) => {
                report.verify_errors += 1;
                report.diagnostics.push(format!("candidate {}: {e}", c.index));
            }
            Ok(v) if !v.keep => report.below_agreement += 1,
            Ok(v) => verified.push(CuratedRecord {
                task: c.task.clone(),
                spec: c.spec.clone(),
                signature: c.signature.clone(),
                agreement: v.agreement,
                p_pass: v.p_pass,
                bucket: bucketize(v.p_pass, &cfg.thresholds),
                curriculum_rank: 0,
            }),
        }
    }
    report.verified = verified.len();
    for b in Bucket::ALL {
        report
            .verified_buckets
            .insert(b, verified.iter().filter(|r| r.bucket == b).count());
    }
    verified
}

/// Pool to ordered dataset.
pub fn curate_pool(
    pool: &[PoolEntry],
    gateway: &Gateway,
    cfg: &CurationConfig,
    seed: u64,
) -> Result<(Vec<CuratedRecord>, CurationReport), CurationError> {
    cfg.validate()?;
    let mut report = CurationReport::default();
    let candidates = parse_pool(pool, &mut report);
    let verified = verify_candidates(&candidates, gateway, cfg, &mut report);
    let (records, selection) = select_and_order(&verified, cfg, seed)?;
    report.selection = selection;
    Ok((records, report))
}

/// One canonical JSON object per line, trailing newline included.
pub fn to_lines<T: Serialize>(items: &[T]) -> String {
    items.iter().map(|i| canonical::to_string(i) + "\n").collect()
}

/// Parses line-delimited JSON, skipping blank lines. Errors carry 1-based
/// line numbers.
pub fn from_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, CurationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CurationError::Ingest {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn dataset_text(records: &[CuratedRecord]) -> String {
    let lines: Vec<DatasetLine> = records.iter().map(DatasetLine::from).collect();
    to_lines(&lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskspec::ContextType;
    use serde_json::json;

    fn task(q: &str, gold_val: &str) -> GeneratedTask {
        GeneratedTask {
            think: String::new(),
            question: q.into(),
            tools: vec![serde_json::from_value(json!({"name": "f"})).unwrap()],
            gold_calls: vec![ToolCall::from_json("f", json!({"x": gold_val}))],
            raw: String::new(),
        }
    }

    fn record(i: usize, domain: &str, p: f64) -> CuratedRecord {
        CuratedRecord {
            task: task(&format!("q{i}"), "v"),
            spec: TaskSpec {
                domain: domain.into(),
                context_type: ContextType::SingleTurn,
                tool_menu_size: 2,
                num_gold_calls: 1,
            },
            signature: format!("{i:08}"),
            agreement: p,
            p_pass: p,
            bucket: bucketize(p, &BucketThresholds::default()),
            curriculum_rank: 0,
        }
    }

    #[test]
    fn signatures() {
        assert_eq!(signature(&task("Book  a Flight", "v")), signature(&task("book a flight", "v")));
        assert_ne!(signature(&task("q", "a")), signature(&task("q", "b")));
        let pool = vec![task("A", "v"), task("a", "v"), task("b", "v")];
        let once = dedup_tasks(&pool);
        assert_eq!(once.len(), 2);
        assert_eq!(dedup_tasks(&once), once);
    }

    #[test]
    fn buckets() {
        let t = BucketThresholds::default();
        assert_eq!(bucketize(1.0, &t), Bucket::Easy);
        assert_eq!(bucketize(0.75, &t), Bucket::Easy);
        assert_eq!(bucketize(0.5, &t), Bucket::Medium);
        assert_eq!(bucketize(0.25, &t), Bucket::Medium);
        assert_eq!(bucketize(0.124, &t), Bucket::Hard);
    }

    #[test]
    fn remainders() {
        assert_eq!(largest_remainder(2000, &[1.0 / 3.0; 3]), vec![667, 667, 666]);
        assert_eq!(largest_remainder(10, &[0.5, 0.5, 0.0]), vec![5, 5, 0]);
    }

    #[test]
    fn thirds_split_easy_first() {
        let verified: Vec<CuratedRecord> = (0..3000)
            .map(|i| record(i, &format!("d{}", i % 32), [0.875, 0.5, 0.125][i % 3]))
            .collect();
        let cfg = CurationConfig::default();
        let (out, rep) = select_and_order(&verified, &cfg, 7).unwrap();
        assert_eq!(out.len(), 2000);
        assert_eq!(rep.bucket_counts[&Bucket::Easy], 667);
        assert_eq!(rep.bucket_counts[&Bucket::Medium], 667);
        assert_eq!(rep.bucket_counts[&Bucket::Hard], 666);
        assert_eq!(out[0].bucket, Bucket::Easy);
        assert_eq!(out.last().unwrap().bucket, Bucket::Hard);
        assert!(out.iter().enumerate().all(|(i, r)| r.curriculum_rank == i));
        assert!(rep.warnings.is_empty(), "{:?}", rep.warnings);
    }

    #[test]
    fn only_easy_warns() {
        let verified: Vec<CuratedRecord> = (0..3000).map(|i| record(i, &format!("d{}", i % 32), 1.0)).collect();
        let (out, rep) = select_and_order(&verified, &CurationConfig::default(), 1).unwrap();
        assert_eq!(out.len(), 2000);
        assert!(out.iter().all(|r| r.bucket == Bucket::Easy));
        assert!(!rep.warnings.is_empty());
    }

    #[test]
    fn domain_cap() {
        let verified: Vec<CuratedRecord> = (0..6400).map(|i| record(i, &format!("d{}", i % 32), 0.5)).collect();
        let cfg = CurationConfig {
            domain_cap: Some(0.1),
            pool_size: 10_000,
            ..CurationConfig::default()
        };
        let (out, _) = select_and_order(&verified, &cfg, 3).unwrap();
        let mut per: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &out {
            *per.entry(r.spec.domain.as_str()).or_default() += 1;
        }
        assert!(per.values().all(|&c| c <= 200));
    }

    #[test]
    fn empty_pool_errors() {
        assert!(select_and_order(&[], &CurationConfig::default(), 0).is_err());
    }
}
