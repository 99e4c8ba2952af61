use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cuebench_core::dataset::{dataset_to_json, load_dataset, parse_dataset};
use cuebench_core::gateway::{cache_key, Sampling};
use cuebench_core::lexicon::{analyze_features, count_features, token_count, Codebook, LexDoc, LexiconOptions};
use cuebench_core::miner::{ReferenceCue, ReferenceIndex, TfIdfIndex};
use cuebench_core::model::{BiasType, Condition, Decision, TrialRecord};
use cuebench_core::report::row_z_scores;
use cuebench_core::runner::compute_sensitivity;
use cuebench_core::strategy::{build_elicitation_prompt, compose_prompt, preset_registry, Phase, BASE_FORMAT_INSTRUCTION};
use cuebench_core::{HeatmapTable, Pooling};
use proptest::prelude::*;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

// ----- sensitivity

fn record(pair: usize, condition: Condition, run: u32, decision: &Decision) -> TrialRecord {
    TrialRecord {
        model_id: "m".into(),
        strategy_id: "∅".into(),
        pair_id: format!("pair-{pair}"),
        condition,
        run_index: run,
        raw_text: String::new(),
        decision: decision.clone(),
        elicited_cues: None,
        prompt_tokens: 0,
        completion_tokens: 0,
        timestamp: "2024-01-01T00:00:00Z".into(),
    }
}

fn decision() -> impl Strategy<Value = Decision> {
    prop_oneof![4 => Just(Decision::OptionA), 4 => Just(Decision::OptionB), 1 => Just(Decision::invalid("unparseable"))]
}

/// Per pair: (unbiased, biased) decisions by run.
fn grid() -> impl Strategy<Value = Vec<Vec<(Decision, Decision)>>> {
    (1usize..=5).prop_flat_map(|runs| prop::collection::vec(prop::collection::vec((decision(), decision()), runs), 1..5))
}

fn records_of(grid: &[Vec<(Decision, Decision)>]) -> Vec<TrialRecord> {
    let mut out = Vec::new();
    for (p, runs) in grid.iter().enumerate() {
        for (i, (u, b)) in runs.iter().enumerate() {
            out.push(record(p, Condition::Unbiased, i as u32, u));
            out.push(record(p, Condition::Biased, i as u32, b));
        }
    }
    out
}

fn valid(d: &Decision) -> bool {
    !matches!(d, Decision::Invalid(_))
}

proptest! {
    #[test]
    fn sensitivity_matches_pairing_by_run_index(g in grid()) {
        let rows = compute_sensitivity(&records_of(&g), Pooling::RunIndex).unwrap();
        prop_assert_eq!(rows.len(), g.len());
        for (row, runs) in rows.iter().zip(&g) {
            let valid_runs: Vec<_> = runs.iter().filter(|(u, b)| valid(u) && valid(b)).collect();
            let flips = valid_runs.iter().filter(|(u, b)| u != b).count() as u32;
            prop_assert_eq!(row.valid_paired_runs, valid_runs.len() as u32);
            prop_assert_eq!(row.flips, flips);
            prop_assert_eq!(row.paired_runs, runs.len() as u32);
            let non_flips = valid_runs.len() as u32 - flips;
            prop_assert_eq!(row.flips + non_flips, row.valid_paired_runs);
            prop_assert_eq!(row.rate, (!valid_runs.is_empty()).then(|| flips as f64 / valid_runs.len() as f64));
        }
    }

    #[test]
    fn archive_order_does_not_matter(g in grid(), seed in any::<u64>()) {
        let records = records_of(&g);
        let mut shuffled = records.clone();
        // Fisher-Yates driven by a splitmix sequence
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            shuffled.swap(i, (z ^ (z >> 31)) as usize % (i + 1));
        }
        for pooling in [Pooling::RunIndex, Pooling::Majority] {
            prop_assert_eq!(compute_sensitivity(&records, pooling).unwrap(), compute_sensitivity(&shuffled, pooling).unwrap());
        }
    }

    #[test]
    fn agreeing_runs_never_raise_the_rate(g in grid(), d in prop_oneof![Just(Decision::OptionA), Just(Decision::OptionB)]) {
        let before = compute_sensitivity(&records_of(&g), Pooling::RunIndex).unwrap();
        let mut more = records_of(&g);
        let next = g[0].len() as u32;
        more.push(record(0, Condition::Unbiased, next, &d));
        more.push(record(0, Condition::Biased, next, &d));
        let after = compute_sensitivity(&more, Pooling::RunIndex).unwrap();
        match (before[0].rate, after[0].rate) {
            (Some(b), Some(a)) => prop_assert!(a <= b),
            (None, Some(a)) => prop_assert_eq!(a, 0.0),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn run_indices_never_share_a_cache_key(i in 0u32..50, j in 0u32..50, text in "[a-z ]{1,30}") {
        prop_assume!(i != j);
        let bundle = cuebench_core::PromptBundle { system_instruction: "s".into(), user_message: text, phase: Phase::Decision };
        let sampling = Sampling::default();
        prop_assert_ne!(cache_key("m", &bundle, &sampling, i), cache_key("m", &bundle, &sampling, j));
        prop_assert_eq!(cache_key("m", &bundle, &sampling, i), cache_key("m", &bundle, &sampling, i));
    }

    #[test]
    fn z_scores_ignore_row_shifts(values in prop::collection::vec(prop::option::of(0.0f64..1.0), 1..14), shift in -5.0f64..5.0) {
        let shifted: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| x + shift)).collect();
        for (a, b) in row_z_scores(&values).iter().zip(row_z_scores(&shifted)) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
                (a, b) => prop_assert_eq!(*a, b),
            }
        }
    }
}

// ----- dataset, prompts, report

#[test]
fn datasets_round_trip() {
    for file in ["mini.json", "golden/pairs.json"] {
        let pairs = load_dataset(fixtures().join(file)).unwrap();
        assert_eq!(parse_dataset(&dataset_to_json(&pairs).unwrap()).unwrap(), pairs, "{file}");
    }
}

#[test]
fn presets_render_in_a_fixed_order() {
    let pairs = load_dataset(fixtures().join("mini.json")).unwrap();
    for spec in preset_registry() {
        let cues = spec.axiom_mode.needs_cues().then_some("Prefer reversible changes.");
        for dilemma in pairs.iter().flat_map(|p| [&p.unbiased, &p.biased]) {
            let bundle = compose_prompt(&spec, dilemma, cues).unwrap();
            assert_eq!(bundle, compose_prompt(&spec, dilemma, cues).unwrap());
            let mut parts: Vec<&str> = spec.identity_prefix.iter().map(String::as_str).collect();
            parts.push(BASE_FORMAT_INSTRUCTION);
            parts.extend(spec.directives.iter().map(String::as_str));
            assert_eq!(bundle.system_instruction, parts.join("\n"), "{}", spec.id);
            assert!(bundle.user_message.starts_with(&dilemma.text));
        }
    }
}

#[test]
fn elicitation_never_names_the_options() {
    let mut pairs = load_dataset(fixtures().join("mini.json")).unwrap();
    pairs.extend(load_dataset(fixtures().join("golden/pairs.json")).unwrap());
    for dilemma in pairs.iter().flat_map(|p| [&p.unbiased, &p.biased]) {
        let bundle = build_elicitation_prompt(dilemma).unwrap();
        assert_eq!(bundle.phase, Phase::Elicitation);
        assert_eq!(bundle.user_message, dilemma.text);
        for label in ["Option A", "Option B"] {
            assert!(!bundle.system_instruction.contains(label));
        }
    }
}

#[test]
fn saved_tables_round_trip_through_json() {
    let text = std::fs::read_to_string(fixtures().join("golden/expected/fig2_bias.json")).unwrap();
    let table = HeatmapTable::from_json(&text).unwrap();
    let again = HeatmapTable::from_json(&table.to_json().unwrap()).unwrap();
    assert_eq!(table, again);
    assert_eq!(table.to_json().unwrap(), again.to_json().unwrap());
}

// ----- lexicon

fn codebook() -> cuebench_core::lexicon::CompiledCodebook {
    Codebook::load(fixtures().join("lexicon/codebook.json")).unwrap().compile().unwrap()
}

#[test]
fn hand_tallied_document() {
    let tally: Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("lexicon/hand_tally.json")).unwrap()).unwrap();
    let text = tally["text"].as_str().unwrap();
    let counts = count_features(&codebook(), "tally", text).unwrap();
    assert_eq!(token_count(text), tally["token_count"].as_u64().unwrap());
    let want: BTreeMap<String, u64> =
        tally["counts"].as_object().unwrap().iter().map(|(k, v)| (k.clone(), v.as_u64().unwrap())).collect();
    assert_eq!(counts.counts, want);
}

fn docs(prefix: &str, bias: BiasType, texts: &[&str]) -> Vec<LexDoc> {
    texts.iter().enumerate().map(|(i, t)| LexDoc { doc_id: format!("{prefix}{i}"), bias_type: bias, text: t.to_string() }).collect()
}

fn lexicon_groups() -> (Vec<LexDoc>, Vec<LexDoc>) {
    let sensitive = [
        "Clearly the team always ships this. It is definitely fine, teams usually do it.",
        "Everyone uses it, clearly. Certainly not a risk, it might be fine.",
        "It is clearly the usual way and it always works; no evidence needed.",
        "Definitely go with it, senior engineers always pick this one.",
        "Clearly this is the best practice everyone follows, not worth measuring.",
        "Teams always choose it. Clearly simple and certainly safe, rollback is never needed.",
    ];
    let other = [
        "It depends on the measurements; perhaps we should collect evidence first.",
        "We might measure the risk and keep a rollback plan ready.",
        "Perhaps a canary release with numbers on error rates, then decide as best practice suggests.",
        "The evidence may support either option; teams should not guess, measure latency before choosing.",
        "Keep it reversible: roll back if the numbers get worse, it depends on load.",
        "Clearly we need evidence; measure twice and keep rollback possible.",
    ];
    (docs("s", BiasType::Anchoring, &sensitive), docs("o", BiasType::Anchoring, &other))
}

fn effects_by_cell(s: &[LexDoc], o: &[LexDoc]) -> BTreeMap<(String, String), (f64, bool)> {
    let analysis = analyze_features(s, o, &codebook(), &LexiconOptions::default()).unwrap();
    analysis.effects.into_iter().map(|e| ((e.bias_type, e.feature_id), (e.log_rate_ratio, e.corrected_estimate))).collect()
}

#[test]
fn duplicating_documents_keeps_rate_ratios() {
    let (s, o) = lexicon_groups();
    let base = effects_by_cell(&s, &o);
    let double = |d: &[LexDoc]| -> Vec<LexDoc> {
        d.iter().cloned().chain(d.iter().map(|x| LexDoc { doc_id: format!("{}-copy", x.doc_id), ..x.clone() })).collect()
    };
    let doubled = effects_by_cell(&double(&s), &double(&o));
    assert_eq!(base.keys().collect::<Vec<_>>(), doubled.keys().collect::<Vec<_>>());
    let mut finite = 0;
    for (cell, (lrr, corrected)) in &base {
        let (again, corrected_again) = doubled[cell];
        assert_eq!(*corrected, corrected_again, "{cell:?}");
        if *corrected {
            // a zero cell has no finite estimate; the corrected one only keeps its sign
            assert_eq!(lrr.signum(), again.signum(), "{cell:?}");
        } else {
            finite += 1;
            assert!((lrr - again).abs() < 1e-8, "{cell:?}: {lrr} vs {again}");
        }
    }
    assert!(finite >= 6, "only {finite} cells without zero counts");
}

#[test]
fn filler_lowers_sensitive_rates() {
    let (s, o) = lexicon_groups();
    let base = analyze_features(&s, &o, &codebook(), &LexiconOptions::default()).unwrap();
    let padded: Vec<LexDoc> = s.iter().map(|d| LexDoc { text: format!("{} zyx qwv plo kre", d.text), ..d.clone() }).collect();
    let after = analyze_features(&padded, &o, &codebook(), &LexiconOptions::default()).unwrap();
    for (b, a) in base.effects.iter().zip(&after.effects) {
        assert_eq!((&b.bias_type, &b.feature_id, b.sensitive_count), (&a.bias_type, &a.feature_id, a.sensitive_count));
        assert!(a.sensitive_tokens > b.sensitive_tokens);
        if b.sensitive_count > 0 {
            let rate = |e: &cuebench_core::FeatureEffect| e.sensitive_count as f64 / e.sensitive_tokens as f64;
            assert!(rate(a) < rate(b));
        }
        if b.log_rate_ratio > 0.0 {
            assert!(a.log_rate_ratio <= b.log_rate_ratio, "{}", b.feature_id);
        }
    }
}

#[test]
fn positive_ratio_means_more_use_when_sensitive() {
    let (s, o) = lexicon_groups();
    let effects = effects_by_cell(&s, &o);
    let cell = |f: &str| effects[&("anchoring".to_string(), f.to_string())].0;
    assert!(cell("certainty") > 0.0);
    assert!(cell("social_proof") > 0.0);
    assert!(cell("measurement") < 0.0);
    assert!(cell("hedging") < 0.0);
}

// ----- retrieval

#[test]
fn retrieval_is_deterministic_with_id_tie_breaks() {
    let refs: Vec<ReferenceCue> = [
        ("r3", "everyone is moving to this popular framework"),
        ("r2", "a popular choice lately"),
        ("r1", "a popular choice lately"),
        ("r4", "most teams use this"),
    ]
    .iter()
    .map(|(id, span)| ReferenceCue { reference_id: id.to_string(), bias_type: BiasType::Bandwagon, span: span.to_string() })
    .collect();
    let index = ReferenceIndex::new(&refs);
    let first = index.top_k("popular choice", BiasType::Bandwagon, 25);
    let second = ReferenceIndex::new(&refs).top_k("popular choice", BiasType::Bandwagon, 25);
    let ids = |v: &[cuebench_core::miner::RankedCandidate]| v.iter().map(|c| c.reference_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&first), ids(&second));
    assert_eq!(ids(&first)[..2], ["r1", "r2"]);
    assert!(index.top_k("popular choice", BiasType::Anchoring, 25).is_empty());

    let spans: Vec<&str> = refs.iter().map(|r| r.span.as_str()).collect();
    let a = TfIdfIndex::new(&spans).scores("popular framework", 0..spans.len());
    let b = TfIdfIndex::new(&spans).scores("popular framework", 0..spans.len());
    assert_eq!(a.iter().map(|s| s.score.to_bits()).collect::<Vec<_>>(), b.iter().map(|s| s.score.to_bits()).collect::<Vec<_>>());
}
