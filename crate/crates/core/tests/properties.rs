use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use serde_json::{json, Map, Value};
use toolplay::curate::{bucketize, dedup, segment_means, select_and_order, Bucket, BucketThresholds, CurationConfig, CuratedRecord};
use toolplay::eval::{ast_match, classify_error, BenchmarkItem};
use toolplay::gateway::ProbeSample;
use toolplay::gateway::ProbeResult;
use toolplay::genreward::{
    difficulty_reward, score_generator, validity_checks, CurriculumInputs, DifficultyBand, GenRewardConfig,
};
use toolplay::parse::{
    normalize_calls, parse_generator_completion, parse_relaxed, parse_solver_completion, GeneratedTask, ToolCall,
    ToolSpec,
};
use toolplay::solreward::{accuracy_reward, pair_score, score_solver_completion, AccuracyWeights, SolverRewardConfig};
use toolplay::taskspec::{extract_control_spec, render_generator_prompt, PromptBundle, SpecDistribution};

// ---- task specs

#[test]
fn every_sampled_spec_is_valid() {
    let sampler = SpecDistribution::default().sampler().unwrap();
    for seed in 0..100_000u64 {
        let spec = sampler.draw(seed, 0);
        spec.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
}

fn chi_square(counts: &BTreeMap<String, usize>, weights: &BTreeMap<String, f64>, n: usize) -> f64 {
    let total: f64 = weights.values().sum();
    weights
        .iter()
        .map(|(d, w)| {
            let expected = n as f64 * w / total;
            let observed = *counts.get(d).unwrap_or(&0) as f64;
            (observed - expected).powi(2) / expected
        })
        .sum()
}

#[test]
fn domain_frequencies_follow_weights() {
    let n = 40_000;
    // 0.999 quantiles of chi-square with 31 and 2 degrees of freedom
    for (dist, critical) in [
        (SpecDistribution::default(), 61.1),
        (
            SpecDistribution {
                domain_weights: BTreeMap::from([("a".into(), 1.0), ("b".into(), 2.0), ("c".into(), 7.0)]),
                ..SpecDistribution::default()
            },
            13.8,
        ),
    ] {
        let sampler = dist.sampler().unwrap();
        let mut counts = BTreeMap::new();
        for i in 0..n {
            *counts.entry(sampler.draw(11, i as u64).domain).or_insert(0) += 1;
        }
        let stat = chi_square(&counts, &dist.domain_weights, n);
        assert!(stat < critical, "chi-square {stat} >= {critical}");
    }
}

proptest! {
    #[test]
    fn same_seed_same_specs(seed in any::<u64>(), index in 0u64..1000) {
        let s = SpecDistribution::default().sampler().unwrap();
        prop_assert_eq!(s.draw(seed, index), s.draw(seed, index));
    }

    #[test]
    fn control_spec_round_trips(seed in any::<u64>()) {
        let spec = SpecDistribution::default().sampler().unwrap().draw(seed, 0);
        let prompt = render_generator_prompt(&spec, &PromptBundle::default()).unwrap();
        prop_assert_eq!(extract_control_spec(&prompt), Some(spec));
    }
}

// ---- parsing

fn arb_scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|i| json!(i)),
        any::<u64>().prop_map(|u| json!(u)),
        any::<f64>().prop_filter("finite", |f| f.is_finite()).prop_map(|f| json!(f)),
        "\\PC{0,12}".prop_filter("not an ellipsis", |s| !matches!(s.trim(), "..." | "\u{2026}")).prop_map(Value::String),
    ]
}

fn arb_json() -> impl Strategy<Value = Value> {
    arb_scalar().prop_recursive(4, 32, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::Array),
            prop::collection::btree_map("[a-z_]{1,6}", inner, 0..5)
                .prop_map(|m| Value::Object(m.into_iter().collect::<Map<_, _>>())),
        ]
    })
}

fn arb_call() -> impl Strategy<Value = ToolCall> {
    (
        prop::sample::select(vec!["alpha", "beta", "gamma"]),
        prop::collection::btree_map(prop::sample::select(vec!["k1", "k2", "k3"]), arb_scalar(), 0..3),
    )
        .prop_map(|(name, args)| ToolCall::from_json(name, Value::Object(args.into_iter().map(|(k, v)| (k.to_string(), v)).collect())))
}

/// Serializes `args` with keys in the given order.
fn args_in_order(call: &ToolCall, reverse: bool) -> String {
    let mut keys: Vec<&String> = call.arguments.keys().collect();
    if reverse {
        keys.reverse();
    }
    let body: Vec<String> = keys
        .iter()
        .map(|k| format!("{}: {}", serde_json::to_string(k).unwrap(), call.arguments[*k]))
        .collect();
    format!(r#"{{"name": {}, "arguments": {{{}}}}}"#, serde_json::to_string(&call.name).unwrap(), body.join(", "))
}

fn answer(calls: &[ToolCall], reverse: bool) -> String {
    let items: Vec<String> = calls.iter().map(|c| args_in_order(c, reverse)).collect();
    format!("<tool_call_answer>[{}]</tool_call_answer>", items.join(", "))
}

proptest! {
    #[test]
    fn relaxed_agrees_with_strict_on_strict_input(v in arb_json()) {
        let text = serde_json::to_string(&v).unwrap();
        let strict: Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(parse_relaxed(&text).unwrap(), strict);
        let pretty = serde_json::to_string_pretty(&v).unwrap();
        prop_assert_eq!(parse_relaxed(&pretty).unwrap(), v);
    }

    #[test]
    fn normalization_is_idempotent(calls in prop::collection::vec(arb_call(), 1..4)) {
        let once = normalize_calls(&serde_json::to_value(&calls).unwrap()).unwrap().strict().unwrap();
        let text = toolplay::parse::calls_to_canonical_json(&once);
        let twice = normalize_calls(&parse_relaxed(&text).unwrap()).unwrap().strict().unwrap();
        prop_assert_eq!(toolplay::parse::calls_to_canonical_json(&twice), text);
        prop_assert_eq!(once, calls);
    }

    #[test]
    fn canonical_json_ignores_key_order(call in arb_call()) {
        let a = parse_solver_completion(&answer(std::slice::from_ref(&call), false)).value.unwrap();
        let b = parse_solver_completion(&answer(std::slice::from_ref(&call), true)).value.unwrap();
        prop_assert_eq!(a[0].canonical_json(), b[0].canonical_json());
    }

    #[test]
    fn solver_flags_are_monotone(
        prefix in prop::sample::select(vec!["", "<think>x</think>", "<tool_call_answer>", "junk"]),
        body in prop::sample::select(vec![
            "[{\"name\": \"f\", \"arguments\": {}}]", "[{'name': 'f'}]", "{\"a\": 1}", "[1, 2]", "nope", "[{...}]", "", "```json\n[{\"name\": \"f\"}]\n```",
        ]),
        close in any::<bool>(),
    ) {
        let text = format!("{prefix}<tool_call_answer>{body}{}", if close { "</tool_call_answer>" } else { "" });
        let f = parse_solver_completion(&text).flags;
        prop_assert!(!f.normalized_ok || f.gold_json_ok);
        prop_assert!(!f.gold_json_ok || f.tags_ok);
        let g = parse_generator_completion(&format!("<think>t</think><question>q</question><available_tools>[]</available_tools>{text}")).outcome.flags;
        prop_assert!(!g.normalized_ok || g.gold_json_ok);
        prop_assert!(!g.gold_json_ok || g.tags_ok);
    }
}

// ---- generator reward

fn band() -> DifficultyBand {
    DifficultyBand::default()
}

proptest! {
    #[test]
    fn band_is_flat_and_continuous(p in 0.25f64..=0.75, eps in 1e-9f64..1e-3) {
        let b = band();
        prop_assert_eq!(difficulty_reward(p, &b), 1.0);
        // Gaussian slope is zero at the edge, so the gap is second order
        let bound = eps * eps / (2.0 * b.sigma * b.sigma) + 1e-15;
        prop_assert!((1.0 - difficulty_reward(b.p_low - eps, &b)).abs() <= bound);
        prop_assert!((1.0 - difficulty_reward(b.p_high + eps, &b)).abs() <= bound);
    }

    #[test]
    fn decays_away_from_the_band(a in 0.125f64..0.25, d in 1e-4f64..0.1) {
        let b = band();
        let below = difficulty_reward(a, &b);
        if a - d >= 0.125 {
            prop_assert!(difficulty_reward(a - d, &b) < below);
        }
        let hi = 0.75 + (0.25 - a);
        if hi + d <= 1.0 {
            prop_assert!(difficulty_reward(hi + d, &b) < difficulty_reward(hi, &b));
        }
    }

    #[test]
    fn symmetric_band_is_symmetric(t in 0.0f64..=0.125) {
        let b = band();
        prop_assert!((difficulty_reward(0.25 - t, &b) - difficulty_reward(0.75 + t, &b)).abs() <= 1e-12);
    }

    #[test]
    fn gated_below_one_success(p in 0.0f64..0.125) {
        prop_assert_eq!(difficulty_reward(p, &band()), 0.0);
    }

    #[test]
    fn validity_checks_ignore_argument_order(calls in prop::collection::vec(arb_call(), 1..3), q in "[a-z0-9 ]{0,30}") {
        let menu: Vec<ToolSpec> = serde_json::from_value(json!([
            {"name": "alpha", "parameters": {"k1": {"type": "string"}}, "required": ["k1"]},
            {"name": "beta", "parameters": {}, "required": []},
        ])).unwrap();
        let a = parse_solver_completion(&answer(&calls, false)).value.unwrap();
        let b = parse_solver_completion(&answer(&calls, true)).value.unwrap();
        prop_assert_eq!(
            validity_checks(Some(&q), Some(&menu), Some(&a)),
            validity_checks(Some(&q), Some(&menu), Some(&b))
        );
    }

    #[test]
    fn generator_total_is_the_sum(
        cut in 0usize..200,
        p in 0.0f64..=1.0,
        judge in 1u8..=5,
        with_curriculum in any::<bool>(),
    ) {
        let full = "<think>t</think>\n<question>Weather in Paris</question>\n<available_tools>[{\"name\": \"w\", \"parameters\": {\"city\": {\"type\": \"string\"}}, \"required\": [\"city\"]}]</available_tools>\n<tool_call_answer>[{\"name\": \"w\", \"arguments\": {\"city\": \"Paris\"}}]</tool_call_answer>";
        let text: String = full.chars().take(full.len() - cut.min(full.len())).collect();
        let parsed = parse_generator_completion(&text);
        let inputs = with_curriculum.then_some(CurriculumInputs { p_succ: p, judge_score: judge });
        let b = score_generator(&parsed, inputs, &GenRewardConfig::default()).unwrap();
        prop_assert_eq!(b.total_raw, f64::from(b.fmt) + b.valid + b.curr);
        prop_assert_eq!(b.curr, b.diff + b.sem);
        prop_assert!((0.0..=1.0).contains(&b.total_normalized));
    }
}

// ---- solver reward

proptest! {
    #[test]
    fn accuracy_bounds_and_penalty_neutrality(
        golds in prop::collection::vec(arb_call(), 1..4),
        preds in prop::collection::vec(arb_call(), 0..5),
    ) {
        let w = AccuracyWeights::default();
        let r = accuracy_reward(&preds, &golds, &w);
        prop_assert!((0.0..=1.0).contains(&r.r_acc));
        prop_assert!((0.0..=1.0).contains(&r.base_accuracy));
        if preds.len() <= golds.len() {
            prop_assert_eq!(r.penalty_factor, 1.0);
        }
        for p in &preds {
            for g in &golds {
                let s = pair_score(p, g, &w).score;
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
        prop_assert_eq!(&r, &accuracy_reward(&preds, &golds, &w));
    }

    #[test]
    fn solver_scores_ignore_argument_order(
        golds in prop::collection::vec(arb_call(), 1..3),
        preds in prop::collection::vec(arb_call(), 1..3),
    ) {
        let cfg = SolverRewardConfig::default();
        let (a, _) = score_solver_completion(&answer(&preds, false), &golds, &cfg);
        let (b, _) = score_solver_completion(&answer(&preds, true), &golds, &cfg);
        prop_assert_eq!(a.total_raw, a.fmt + a.acc);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn probe_accounting(pattern in prop::collection::vec(any::<bool>(), 1..16)) {
        let gold = vec![ToolCall::from_json("f", json!({"a": 1}))];
        let samples: Vec<ProbeSample> = pattern
            .iter()
            .map(|ok| {
                let text = if *ok {
                    "<tool_call_answer>[{\"name\": \"f\", \"arguments\": {\"a\": 1}}]</tool_call_answer>"
                } else {
                    "<tool_call_answer>[{\"name\": \"f\", \"arguments\": {\"a\": 2}}]</tool_call_answer>"
                };
                ProbeSample::score(text.to_string(), &gold)
            })
            .collect();
        let r = ProbeResult::from_samples(samples);
        prop_assert!(r.successes <= r.k);
        prop_assert_eq!(r.successes as usize, pattern.iter().filter(|b| **b).count());
        let scaled = r.p_succ * f64::from(r.k);
        prop_assert_eq!(scaled, scaled.round());
    }
}

// ---- curation

fn record(i: usize, domain: usize, successes: u32) -> CuratedRecord {
    let p = f64::from(successes) / 8.0;
    let task = GeneratedTask {
        think: String::new(),
        question: format!("q{i}"),
        tools: vec![],
        gold_calls: vec![ToolCall::from_json("f", json!({"i": i}))],
        raw: String::new(),
    };
    CuratedRecord {
        signature: toolplay::curate::signature(&task),
        task,
        spec: toolplay::taskspec::TaskSpec {
            domain: format!("d{domain}"),
            context_type: toolplay::taskspec::ContextType::SingleTurn,
            tool_menu_size: 2,
            num_gold_calls: 1,
        },
        agreement: p,
        p_pass: p,
        bucket: bucketize(p, &BucketThresholds::default()),
        curriculum_rank: 0,
    }
}

proptest! {
    #[test]
    fn dedup_is_idempotent(items in prop::collection::vec(0u8..10, 0..40)) {
        let once = dedup(&items, |x| x.to_string());
        prop_assert_eq!(dedup(&once, |x| x.to_string()), once.clone());
        let distinct: BTreeSet<u8> = items.iter().copied().collect();
        prop_assert_eq!(once.len(), distinct.len());
    }

    #[test]
    fn selection_conserves_and_orders(
        spec in prop::collection::vec((0usize..4, 1u32..=8), 1..80),
        output in 1usize..40,
        seed in any::<u64>(),
    ) {
        let verified: Vec<CuratedRecord> = spec.iter().enumerate().map(|(i, &(d, s))| record(i, d, s)).collect();
        let cfg = CurationConfig { pool_size: 100, output_size: output, domain_cap: Some(1.0), ..CurationConfig::default() };
        let (out, report) = select_and_order(&verified, &cfg, seed).unwrap();
        let input: BTreeSet<&str> = verified.iter().map(|r| r.signature.as_str()).collect();
        prop_assert!(out.iter().all(|r| input.contains(r.signature.as_str())));
        prop_assert_eq!(out.len(), output.min(verified.len()));
        prop_assert_eq!(report.selected, out.len());
        prop_assert_eq!(out.iter().map(|r| r.curriculum_rank).collect::<Vec<_>>(), (0..out.len()).collect::<Vec<_>>());
        let means = segment_means(&out);
        prop_assert!(means.windows(2).all(|w| w[0] >= w[1] - 1e-12), "{:?}", means);
        let (again, _) = select_and_order(&verified, &cfg, seed).unwrap();
        prop_assert_eq!(again, out);
    }

    #[test]
    fn domain_cap_holds(spec in prop::collection::vec((0usize..4, 1u32..=8), 1..80), output in 1usize..40) {
        let verified: Vec<CuratedRecord> = spec.iter().enumerate().map(|(i, &(d, s))| record(i, d, s)).collect();
        let cfg = CurationConfig { pool_size: 100, output_size: output, ..CurationConfig::default() };
        let (out, report) = select_and_order(&verified, &cfg, 1).unwrap();
        let mut per: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &out {
            *per.entry(r.spec.domain.as_str()).or_default() += 1;
        }
        prop_assert!(per.values().all(|&c| c <= report.domain_cap));
        prop_assert!(Bucket::ALL.iter().all(|b| report.bucket_counts.get(b).copied().unwrap_or(0) <= out.len()));
    }
}

// ---- evaluation

fn item(golds: Vec<ToolCall>) -> BenchmarkItem {
    BenchmarkItem {
        id: "x".into(),
        question: "q".into(),
        tools: vec![],
        gold_calls: golds,
        history: None,
    }
}

proptest! {
    #[test]
    fn taxonomy_is_total_and_consistent(
        golds in prop::collection::vec(arb_call(), 1..3),
        preds in prop::collection::vec(arb_call(), 0..4),
        garble in 0u8..4,
    ) {
        let text = match garble {
            0 => answer(&preds, false),
            1 => String::new(),
            2 => "<tool_call_answer>[{...}]</tool_call_answer>".into(),
            _ => answer(&preds, true).replace("[", "("),
        };
        let it = item(golds.clone());
        let matched = ast_match(&text, &it);
        let label = classify_error(&text, &it);
        prop_assert_eq!(matched, label.is_none());
        if let Some(l) = label {
            prop_assert_eq!(l.category, l.cause.category());
        }
        let (b, _) = score_solver_completion(&text, &golds, &SolverRewardConfig::default());
        prop_assert_eq!(matched, b.acc == 1.0 && b.penalty_factor == 1.0);
    }
}
