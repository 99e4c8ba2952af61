//! Regex codebook matching and per-token feature rate comparisons.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use regex_automata::meta;
use regex_automata::util::syntax;
use regex_automata::{Anchored, Input, MatchKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BiasType, Condition, Decision, DilemmaPair, TrialRecord};
use crate::report::write_file;
use crate::stats::{
    bh_adjust, exact_rate_ratio_test, normal_two_sided_p, poisson_rate_glm, stars, EffectMethod, FeatureEffect,
    GlmOptions, HcVariant, StatsError, TwoSidedMethod,
};

pub const TOKENIZATION: &str = r"maximal runs of Unicode word characters (\w+)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    Topical,
    Stance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub feature_id: String,
    pub display_name: String,
    pub patterns: Vec<String>,
    pub category: FeatureCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub features: Vec<FeatureSpec>,
}

/// Finds leftmost matches, then extends each to the longest match at that start.
struct LongestMatcher {
    leftmost: Regex,
    longest: meta::Regex,
}

impl LongestMatcher {
    fn new(pattern: &str) -> std::result::Result<Self, String> {
        let leftmost = regex::RegexBuilder::new(pattern).case_insensitive(true).build().map_err(|e| e.to_string())?;
        let longest = meta::Regex::builder()
            .configure(meta::Regex::config().match_kind(MatchKind::All))
            .syntax(syntax::Config::new().case_insensitive(true))
            .build(pattern)
            .map_err(|e| e.to_string())?;
        Ok(LongestMatcher { leftmost, longest })
    }

    /// Non-overlapping, leftmost-longest, non-empty matches.
    fn count(&self, text: &str) -> u64 {
        let mut n = 0;
        let mut pos = 0;
        while pos <= text.len() {
            let Some(m) = self.leftmost.find_at(text, pos) else { break };
            let start = m.start();
            let input = Input::new(text).range(start..).anchored(Anchored::Yes);
            let end = self.longest.search(&input).map_or(m.end(), |l| l.end().max(m.end()));
            if end > start {
                n += 1;
                pos = end;
            } else {
                // skip past an empty match without counting it
                pos = start + text[start..].chars().next().map_or(1, char::len_utf8);
            }
        }
        n
    }
}

struct CompiledFeature {
    spec: FeatureSpec,
    matchers: Vec<LongestMatcher>,
}

pub struct CompiledCodebook {
    features: Vec<CompiledFeature>,
}

impl std::fmt::Debug for CompiledCodebook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.features.iter().map(|c| &c.spec.feature_id)).finish()
    }
}

impl Codebook {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema { record: path.display().to_string(), message: e.to_string() })
    }

    pub fn compile(&self) -> Result<CompiledCodebook> {
        let mut seen = HashSet::new();
        let mut features = Vec::with_capacity(self.features.len());
        for f in &self.features {
            if !seen.insert(f.feature_id.as_str()) {
                return Err(Error::Schema { record: f.feature_id.clone(), message: "duplicate feature_id".into() });
            }
            if f.patterns.is_empty() {
                return Err(Error::Schema { record: f.feature_id.clone(), message: "feature has no patterns".into() });
            }
            let matchers = f
                .patterns
                .iter()
                .map(|p| LongestMatcher::new(p).map_err(|e| Error::Regex(format!("feature `{}`, pattern `{p}`: {e}", f.feature_id))))
                .collect::<Result<Vec<_>>>()?;
            features.push(CompiledFeature { spec: f.clone(), matchers });
        }
        Ok(CompiledCodebook { features })
    }
}

impl CompiledCodebook {
    pub fn features(&self) -> impl Iterator<Item = &FeatureSpec> {
        self.features.iter().map(|f| &f.spec)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+").expect("static regex"))
}

pub fn token_count(text: &str) -> u64 {
    word_re().find_iter(text).count() as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCounts {
    pub doc_id: String,
    pub token_count: u64,
    pub counts: BTreeMap<String, u64>,
}

pub fn count_features(codebook: &CompiledCodebook, doc_id: &str, document: &str) -> Result<FeatureCounts> {
    if document.trim().is_empty() {
        return Err(StatsError::Domain(format!("document `{doc_id}` is empty")).into());
    }
    let tokens = token_count(document);
    if tokens == 0 {
        return Err(StatsError::Domain(format!("document `{doc_id}` has no word tokens")).into());
    }
    let counts = codebook
        .features
        .iter()
        .map(|f| (f.spec.feature_id.clone(), f.matchers.iter().map(|m| m.count(document)).sum()))
        .collect();
    Ok(FeatureCounts { doc_id: doc_id.to_string(), token_count: tokens, counts })
}

/// A response document tagged with the bias type of its dilemma.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexDoc {
    pub doc_id: String,
    pub bias_type: BiasType,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexiconOptions {
    pub alpha: f64,
    /// Totals k1 + k0 below this use the exact conditional test.
    pub exact_threshold: u64,
    pub quasi_threshold: f64,
    pub hc_variant: HcVariant,
    pub two_sided: TwoSidedMethod,
    pub glm: GlmOptions,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        LexiconOptions {
            alpha: 0.05,
            exact_threshold: 10,
            quasi_threshold: 1.5,
            hc_variant: HcVariant::Hc0,
            two_sided: TwoSidedMethod::MinLikelihood,
            glm: GlmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateCell {
    pub bias_type: String,
    pub feature_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasGroupSize {
    pub bias_type: String,
    pub sensitive_docs: usize,
    pub sensitive_tokens: u64,
    pub other_docs: usize,
    pub other_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconAnalysis {
    pub metadata: BTreeMap<String, String>,
    pub groups: Vec<BiasGroupSize>,
    pub effects: Vec<FeatureEffect>,
    pub degenerate: Vec<DegenerateCell>,
}

struct Counted {
    bias: BiasType,
    sensitive: bool,
    counts: FeatureCounts,
}

fn estimate_cell(
    bias: BiasType,
    feature_id: &str,
    docs: &[&Counted],
    opts: &LexiconOptions,
) -> Result<std::result::Result<FeatureEffect, DegenerateCell>> {
    let mut k = [0u64; 2];
    let mut t = [0u64; 2];
    let mut ys = Vec::with_capacity(docs.len());
    let mut offsets = Vec::with_capacity(docs.len());
    let mut groups = Vec::with_capacity(docs.len());
    for d in docs {
        let y = d.counts.counts[feature_id];
        let g = usize::from(d.sensitive);
        k[g] += y;
        t[g] += d.counts.token_count;
        ys.push(y);
        offsets.push((d.counts.token_count as f64).ln());
        groups.push(d.sensitive);
    }
    let (k1, k0, t1, t0) = (k[1], k[0], t[1], t[0]);
    if k1 + k0 == 0 {
        return Ok(Err(DegenerateCell {
            bias_type: bias.as_str().into(),
            feature_id: feature_id.into(),
            reason: "feature absent from every document".into(),
        }));
    }
    let exact = |corrected: bool| -> Result<FeatureEffect> {
        let c = if corrected { 0.5 } else { 0.0 };
        let lrr = (((k1 as f64 + c) / t1 as f64) / ((k0 as f64 + c) / t0 as f64)).ln();
        let p = exact_rate_ratio_test(k1, t1 as f64, k0, t0 as f64, opts.two_sided)?;
        Ok(effect(bias, feature_id, lrr, None, None, EffectMethod::Exact, p, [k1, t1, k0, t0], corrected))
    };
    let zero_cell = k1 == 0 || k0 == 0;
    if zero_cell || k1 + k0 < opts.exact_threshold {
        return exact(zero_cell).map(Ok);
    }
    let fit = match poisson_rate_glm(&ys, &offsets, &groups, opts.glm) {
        Ok(fit) => fit,
        Err(StatsError::Fit(_)) => return exact(false).map(Ok),
        Err(e) => return Err(e.into()),
    };
    // Residual-free fits make the sandwich collapse to zero.
    if fit.dispersion < 1e-8 {
        return exact(false).map(Ok);
    }
    let (se, method) = if fit.dispersion > opts.quasi_threshold {
        (fit.se_quasi(), EffectMethod::GlmQuasi)
    } else {
        (fit.se_hc(opts.hc_variant), EffectMethod::GlmHc)
    };
    let p = if se > 0.0 && se.is_finite() { normal_two_sided_p(fit.beta1 / se) } else { 1.0 };
    Ok(Ok(effect(bias, feature_id, fit.beta1, Some(se), Some(fit.dispersion), method, p, [k1, t1, k0, t0], false)))
}

#[allow(clippy::too_many_arguments)]
fn effect(
    bias: BiasType,
    feature_id: &str,
    lrr: f64,
    se: Option<f64>,
    dispersion: Option<f64>,
    method: EffectMethod,
    p: f64,
    [k1, t1, k0, t0]: [u64; 4],
    corrected: bool,
) -> FeatureEffect {
    FeatureEffect {
        bias_type: bias.as_str().into(),
        feature_id: feature_id.into(),
        log_rate_ratio: lrr,
        se,
        dispersion,
        method,
        p,
        q: p,
        stars: String::new(),
        sensitive_count: k1,
        sensitive_tokens: t1,
        other_count: k0,
        other_tokens: t0,
        corrected_estimate: corrected,
    }
}

/// Per (bias, feature) log rate ratios of sensitive over non-sensitive documents,
/// BH-adjusted across all non-degenerate cells.
pub fn analyze_features(
    sensitive: &[LexDoc],
    non_sensitive: &[LexDoc],
    codebook: &CompiledCodebook,
    opts: &LexiconOptions,
) -> Result<LexiconAnalysis> {
    if sensitive.is_empty() || non_sensitive.is_empty() {
        return Err(StatsError::Domain("both document groups must be non-empty".into()).into());
    }
    let mut counted = Vec::with_capacity(sensitive.len() + non_sensitive.len());
    for (docs, flag) in [(sensitive, true), (non_sensitive, false)] {
        for d in docs {
            counted.push(Counted { bias: d.bias_type, sensitive: flag, counts: count_features(codebook, &d.doc_id, &d.text)? });
        }
    }
    let mut by_bias: BTreeMap<usize, Vec<&Counted>> = BTreeMap::new();
    for c in &counted {
        let idx = BiasType::ALL.iter().position(|b| *b == c.bias).expect("closed vocabulary");
        by_bias.entry(idx).or_default().push(c);
    }
    let mut groups = Vec::new();
    let mut effects = Vec::new();
    let mut degenerate = Vec::new();
    for (idx, docs) in &by_bias {
        let bias = BiasType::ALL[*idx];
        let size = |flag: bool| {
            let sel: Vec<_> = docs.iter().filter(|d| d.sensitive == flag).collect();
            (sel.len(), sel.iter().map(|d| d.counts.token_count).sum::<u64>())
        };
        let ((sd, st), (od, ot)) = (size(true), size(false));
        groups.push(BiasGroupSize { bias_type: bias.as_str().into(), sensitive_docs: sd, sensitive_tokens: st, other_docs: od, other_tokens: ot });
        for f in codebook.features() {
            if sd == 0 || od == 0 {
                degenerate.push(DegenerateCell {
                    bias_type: bias.as_str().into(),
                    feature_id: f.feature_id.clone(),
                    reason: if sd == 0 { "no sensitive documents" } else { "no non-sensitive documents" }.into(),
                });
                continue;
            }
            match estimate_cell(bias, &f.feature_id, docs, opts)? {
                Ok(e) => effects.push(e),
                Err(d) => degenerate.push(d),
            }
        }
    }
    let q = bh_adjust(&effects.iter().map(|e| e.p).collect::<Vec<_>>())?;
    for (e, q) in effects.iter_mut().zip(q) {
        e.q = q;
        e.stars = stars(q).to_string();
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("tokenization".into(), TOKENIZATION.into());
    metadata.insert("matching".into(), "case-insensitive, non-overlapping, leftmost-longest per pattern".into());
    metadata.insert("exact_threshold".into(), opts.exact_threshold.to_string());
    metadata.insert("quasi_threshold".into(), opts.quasi_threshold.to_string());
    metadata.insert("hc_variant".into(), format!("{:?}", opts.hc_variant).to_lowercase());
    metadata.insert("fdr".into(), "Benjamini-Hochberg across all non-degenerate cells".into());
    metadata.insert("sign".into(), "positive = higher per-token usage in sensitive responses".into());
    Ok(LexiconAnalysis { metadata, groups, effects, degenerate })
}

/// Biased-condition responses of one strategy, split by whether the paired run flipped.
/// Pairs whose biased or unbiased response is invalid are left out.
pub fn lexicon_documents(records: &[TrialRecord], pairs: &[DilemmaPair], strategy_id: &str) -> Result<(Vec<LexDoc>, Vec<LexDoc>)> {
    let bias_of: HashMap<&str, BiasType> = pairs.iter().map(|p| (p.pair_id.as_str(), p.bias_type)).collect();
    let unbiased: HashMap<(&str, &str, u32), &Decision> = records
        .iter()
        .filter(|r| r.strategy_id == strategy_id && r.condition == Condition::Unbiased)
        .map(|r| ((r.model_id.as_str(), r.pair_id.as_str(), r.run_index), &r.decision))
        .collect();
    let mut sensitive = Vec::new();
    let mut other = Vec::new();
    let mut seen = BTreeSet::new();
    for r in records.iter().filter(|r| r.strategy_id == strategy_id && r.condition == Condition::Biased) {
        if !seen.insert((r.model_id.as_str(), r.pair_id.as_str(), r.run_index)) {
            return Err(Error::Data(format!("duplicate biased trial ({}, {}, run {})", r.model_id, r.pair_id, r.run_index)));
        }
        let bias = *bias_of.get(r.pair_id.as_str()).ok_or_else(|| Error::Data(format!("pair `{}` not in dataset", r.pair_id)))?;
        let Some(u) = unbiased.get(&(r.model_id.as_str(), r.pair_id.as_str(), r.run_index)) else { continue };
        if !r.decision.is_valid() || !u.is_valid() || r.raw_text.trim().is_empty() || token_count(&r.raw_text) == 0 {
            continue;
        }
        let doc = LexDoc {
            doc_id: format!("{}/{}/{}/{}", r.model_id, r.strategy_id, r.pair_id, r.run_index),
            bias_type: bias,
            text: r.raw_text.clone(),
        };
        if r.decision != **u {
            sensitive.push(doc);
        } else {
            other.push(doc);
        }
    }
    Ok((sensitive, other))
}

/// Cells marked as top-3 by absolute log rate ratio within each bias row.
pub fn top3_cells(effects: &[FeatureEffect]) -> HashSet<(String, String)> {
    let mut rows: BTreeMap<&str, Vec<&FeatureEffect>> = BTreeMap::new();
    for e in effects {
        rows.entry(e.bias_type.as_str()).or_default().push(e);
    }
    let mut out = HashSet::new();
    for row in rows.values_mut() {
        row.sort_by(|a, b| b.log_rate_ratio.abs().total_cmp(&a.log_rate_ratio.abs()).then(a.feature_id.cmp(&b.feature_id)));
        for e in row.iter().take(3) {
            out.insert((e.bias_type.clone(), e.feature_id.clone()));
        }
    }
    out
}

/// Long-format heatmap table: one line per (bias, feature) cell.
pub fn effects_csv(analysis: &LexiconAnalysis, codebook: &Codebook) -> Result<String> {
    let names: HashMap<&str, &str> = codebook.features.iter().map(|f| (f.feature_id.as_str(), f.display_name.as_str())).collect();
    let top = top3_cells(&analysis.effects);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bias_type", "feature_id", "display_name", "log_rate_ratio", "se", "dispersion", "method", "p", "q", "stars", "top3"])?;
    let method = |m: EffectMethod| match m {
        EffectMethod::GlmHc => "glm_hc",
        EffectMethod::GlmQuasi => "glm_quasi",
        EffectMethod::Exact => "exact",
    };
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    for e in &analysis.effects {
        let is_top = top.contains(&(e.bias_type.clone(), e.feature_id.clone()));
        w.write_record([
            e.bias_type.clone(),
            e.feature_id.clone(),
            names.get(e.feature_id.as_str()).copied().unwrap_or("").to_string(),
            format!("{:.6}", e.log_rate_ratio),
            opt(e.se),
            opt(e.dispersion),
            method(e.method).to_string(),
            format!("{:.6}", e.p),
            format!("{:.6}", e.q),
            e.stars.clone(),
            is_top.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Render(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_lexicon(analysis: &LexiconAnalysis, codebook: &Codebook, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    write_file(dir.join("fig5_lexicon.csv"), &effects_csv(analysis, codebook)?)?;
    write_file(dir.join("fig5_lexicon.json"), &serde_json::to_string_pretty(analysis)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(features: &[(&str, &[&str])]) -> CompiledCodebook {
        Codebook {
            name: None,
            features: features
                .iter()
                .map(|(id, pats)| FeatureSpec {
                    feature_id: id.to_string(),
                    display_name: id.to_string(),
                    patterns: pats.iter().map(|p| p.to_string()).collect(),
                    category: FeatureCategory::Topical,
                })
                .collect(),
        }
        .compile()
        .unwrap()
    }

    #[test]
    fn negation_example() {
        let cb = book(&[("negation", &[r"\bnot\b"])]);
        let c = count_features(&cb, "d", "not now, NOT ever").unwrap();
        assert_eq!(c.counts["negation"], 2);
        assert_eq!(c.token_count, 4);
        let z = count_features(&cb, "d", "fine").unwrap();
        assert_eq!(z.counts["negation"], 0);
    }

    #[test]
    fn leftmost_longest_non_overlapping() {
        // leftmost-first would take "foo" and then count "bar" separately
        let cb = book(&[("x", &[r"foo|foobar|bar"])]);
        assert_eq!(count_features(&cb, "d", "foobar").unwrap().counts["x"], 1);
        let cb = book(&[("x", &[r"aa"])]);
        assert_eq!(count_features(&cb, "d", "aaaaa").unwrap().counts["x"], 2);
        let cb = book(&[("x", &[r"a*"])]);
        assert_eq!(count_features(&cb, "d", "baab a").unwrap().counts["x"], 2);
    }

    #[test]
    fn patterns_add_up() {
        let cb = book(&[("bug", &[r"\bbugs?\b", r"\bfail\w*"])]);
        assert_eq!(count_features(&cb, "d", "Bugs fail; the bug FAILED").unwrap().counts["bug"], 4);
    }

    #[test]
    fn bad_codebook_rejected() {
        let dup = Codebook {
            name: None,
            features: vec![
                FeatureSpec { feature_id: "a".into(), display_name: "a".into(), patterns: vec!["x".into()], category: FeatureCategory::Stance },
                FeatureSpec { feature_id: "a".into(), display_name: "a".into(), patterns: vec!["y".into()], category: FeatureCategory::Stance },
            ],
        };
        assert!(dup.compile().is_err());
        let bad = Codebook {
            name: None,
            features: vec![FeatureSpec { feature_id: "a".into(), display_name: "a".into(), patterns: vec!["(".into()], category: FeatureCategory::Topical }],
        };
        assert!(matches!(bad.compile(), Err(Error::Regex(_))));
    }

    #[test]
    fn empty_document_rejected() {
        let cb = book(&[("x", &["x"])]);
        assert!(count_features(&cb, "d", "   ").is_err());
    }

    fn doc(id: &str, bias: BiasType, text: String) -> LexDoc {
        LexDoc { doc_id: id.into(), bias_type: bias, text }
    }

    /// `hits` occurrences of "risk" padded to `tokens` words.
    fn text(hits: usize, tokens: usize) -> String {
        let mut words = vec!["risk"; hits];
        words.extend(std::iter::repeat_n("word", tokens - hits));
        words.join(" ")
    }

    #[test]
    fn three_to_one_rate_ratio() {
        let cb = book(&[("risk", &[r"\brisk\b"]), ("absent", &[r"\bzebra\b"])]);
        let sens: Vec<LexDoc> = (0..4).map(|i| doc(&format!("s{i}"), BiasType::Framing, text(15, 100))).collect();
        let other: Vec<LexDoc> = (0..4).map(|i| doc(&format!("o{i}"), BiasType::Framing, text(5, 100))).collect();
        let a = analyze_features(&sens, &other, &cb, &LexiconOptions::default()).unwrap();
        assert_eq!(a.effects.len(), 1);
        assert!((a.effects[0].log_rate_ratio - 3f64.ln()).abs() < 1e-6);
        assert_eq!(a.degenerate.len(), 1);
        assert_eq!(a.degenerate[0].feature_id, "absent");
        assert!(a.effects[0].q >= a.effects[0].p);
        // identical documents leave no residual variance for the sandwich
        assert_eq!(a.effects[0].method, EffectMethod::Exact);
    }

    #[test]
    fn varied_documents_use_the_glm() {
        let cb = book(&[("risk", &[r"\brisk\b"])]);
        let sens: Vec<LexDoc> = [14, 16, 15, 15].iter().enumerate().map(|(i, &h)| doc(&format!("s{i}"), BiasType::Framing, text(h, 100))).collect();
        let other: Vec<LexDoc> = [4, 6, 5, 5].iter().enumerate().map(|(i, &h)| doc(&format!("o{i}"), BiasType::Framing, text(h, 100))).collect();
        let e = &analyze_features(&sens, &other, &cb, &LexiconOptions::default()).unwrap().effects[0];
        assert_eq!(e.method, EffectMethod::GlmHc);
        assert!((e.log_rate_ratio - 3f64.ln()).abs() < 1e-6);
        assert!(e.se.unwrap() > 0.0);
    }

    #[test]
    fn null_rates_and_small_totals() {
        let cb = book(&[("risk", &[r"\brisk\b"])]);
        let sens = vec![doc("s", BiasType::Anchoring, text(4, 50))];
        let other = vec![doc("o", BiasType::Anchoring, text(4, 50))];
        let a = analyze_features(&sens, &other, &cb, &LexiconOptions::default()).unwrap();
        assert_eq!(a.effects[0].method, EffectMethod::Exact);
        assert!(a.effects[0].log_rate_ratio.abs() < 1e-8);
        assert!(a.effects[0].se.is_none() && a.effects[0].dispersion.is_none());
    }

    #[test]
    fn zero_cell_is_corrected() {
        let cb = book(&[("risk", &[r"\brisk\b"])]);
        let sens = vec![doc("s", BiasType::Anchoring, text(6, 20))];
        let other = vec![doc("o", BiasType::Anchoring, text(0, 20))];
        let e = &analyze_features(&sens, &other, &cb, &LexiconOptions::default()).unwrap().effects[0];
        assert!(e.corrected_estimate);
        assert!((e.log_rate_ratio - 13f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_groups_rejected() {
        let cb = book(&[("x", &["x"])]);
        assert!(analyze_features(&[], &[doc("o", BiasType::Framing, "x".into())], &cb, &LexiconOptions::default()).is_err());
    }

    #[test]
    fn top3_by_magnitude() {
        let mk = |f: &str, l: f64| effect(BiasType::Framing, f, l, None, None, EffectMethod::Exact, 0.5, [1, 1, 1, 1], false);
        let effects = vec![mk("a", 0.1), mk("b", -2.0), mk("c", 1.0), mk("d", 0.5), mk("e", -0.2)];
        let top = top3_cells(&effects);
        let ids: BTreeSet<&str> = top.iter().map(|(_, f)| f.as_str()).collect();
        assert_eq!(ids, ["b", "c", "d"].into_iter().collect());
    }
}
