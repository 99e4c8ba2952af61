//! Corpus mining: score triage, judged coding filter and cue extraction, manual
//! review, TF-IDF cue alignment against a reference set, and prevalence tables.

mod judge;
mod tfidf;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BiasType;
use crate::report::write_file;
use crate::runner::{read_jsonl, JsonlAppender};
use crate::stats::{wilson_ci, ProportionEstimate, StatsError};

pub use judge::{parse_alignment, parse_bias_label, parse_coding, parse_extraction, Judge, JudgePrompts, JudgeTemplate};
pub use tfidf::{tokenize, ScoredDoc, TfIdfIndex, TFIDF_VARIANT};

pub const DEFAULT_TRIAGE_THRESHOLD: f64 = 0.6;
pub const DEFAULT_ALIGNMENT_K: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusText {
    pub prompt_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPrompt {
    pub prompt_id: String,
    pub text: String,
    pub classifier_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Unreviewed,
    Confirmed,
    Rejected,
    Relabelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueRecord {
    pub prompt_id: String,
    pub cue_span: String,
    pub proposed_bias: BiasType,
    pub review_status: ReviewStatus,
    pub final_bias: Option<BiasType>,
}

impl CueRecord {
    /// Confirmed or relabelled: a reviewed, accepted cue.
    pub fn is_positive(&self) -> bool {
        matches!(self.review_status, ReviewStatus::Confirmed | ReviewStatus::Relabelled)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningFailure {
    pub prompt_id: String,
    pub stage: String,
    pub kind: String,
    pub detail: String,
}

fn failure(prompt_id: &str, stage: &str, kind: &str, detail: impl Into<String>) -> MiningFailure {
    MiningFailure { prompt_id: prompt_id.into(), stage: stage.into(), kind: kind.into(), detail: detail.into() }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusText>> {
    let corpus: Vec<CorpusText> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for p in &corpus {
        if !seen.insert(p.prompt_id.as_str()) {
            return Err(Error::Data(format!("duplicate prompt_id `{}` in corpus", p.prompt_id)));
        }
    }
    Ok(corpus)
}

/// Reads a `prompt_id,score` CSV (`.csv`) or a JSON object of scores.
pub fn load_scores(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let scores: HashMap<String, f64> = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut out = HashMap::new();
        for (i, row) in rdr.deserialize::<(String, f64)>().enumerate() {
            let (id, score) = row.map_err(|e| Error::Schema { record: format!("{}:{}", path.display(), i + 2), message: e.to_string() })?;
            out.insert(id, score);
        }
        out
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema { record: path.display().to_string(), message: e.to_string() })?
    };
    if let Some((id, s)) = scores.iter().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Schema { record: id.clone(), message: format!("classifier score {s} outside [0, 1]") });
    }
    Ok(scores)
}

/// Keeps prompts whose score is strictly above `threshold`.
pub fn triage(corpus: &[CorpusText], scores: &HashMap<String, f64>, threshold: f64) -> Result<Vec<CorpusPrompt>> {
    let mut out = Vec::new();
    for p in corpus {
        let score = *scores.get(&p.prompt_id).ok_or_else(|| Error::Data(format!("no classifier score for prompt `{}`", p.prompt_id)))?;
        if score > threshold {
            out.push(CorpusPrompt { prompt_id: p.prompt_id.clone(), text: p.text.clone(), classifier_score: score });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    /// Prompts the judge classified as coding-related, in input order.
    pub coding: Vec<String>,
    pub candidates: Vec<CueRecord>,
    pub failures: Vec<MiningFailure>,
}

enum Screened {
    NotCoding(Option<MiningFailure>),
    Coding(Option<CueRecord>, Option<MiningFailure>),
}

fn screen(prompt: &CorpusPrompt, judge: &Judge<'_>) -> Result<Screened> {
    let id = prompt.prompt_id.as_str();
    let reply = judge.ask(&judge.prompts.coding_filter.render(&[("prompt", &prompt.text)]))?;
    match parse_coding(&reply) {
        Ok(false) => return Ok(Screened::NotCoding(None)),
        Err(e) => return Ok(Screened::NotCoding(Some(failure(id, "coding_filter", "unparseable", e)))),
        Ok(true) => {}
    }
    let reply = judge.ask(&judge.prompts.cue_extraction.render(&[("prompt", &prompt.text)]))?;
    Ok(match parse_extraction(&reply) {
        Ok(None) => Screened::Coding(None, None),
        Err(e) => Screened::Coding(None, Some(failure(id, "cue_extraction", "unparseable", e))),
        Ok(Some((span, _))) if span.is_empty() || !prompt.text.contains(&span) => Screened::Coding(
            None,
            Some(failure(id, "cue_extraction", "non_verbatim", format!("span `{span}` does not occur in the prompt; discarded"))),
        ),
        Ok(Some((span, bias))) => Screened::Coding(
            Some(CueRecord { prompt_id: id.into(), cue_span: span, proposed_bias: bias, review_status: ReviewStatus::Unreviewed, final_bias: None }),
            None,
        ),
    })
}

/// Coding-relevance screen, then cue extraction for coding prompts. Only spans
/// found verbatim in the prompt become candidates.
pub fn filter_and_extract(prompts: &[CorpusPrompt], judge: &Judge<'_>) -> Result<ExtractionOutcome> {
    let screened = judge.par_map(prompts, |p| screen(p, judge))?;
    let mut out = ExtractionOutcome { coding: Vec::new(), candidates: Vec::new(), failures: Vec::new() };
    for (p, s) in prompts.iter().zip(screened) {
        match s {
            Screened::NotCoding(f) => out.failures.extend(f),
            Screened::Coding(c, f) => {
                out.coding.push(p.prompt_id.clone());
                out.candidates.extend(c);
                out.failures.extend(f);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReviewDecision {
    Confirm,
    Reject,
    Relabel(BiasType),
}

impl std::str::FromStr for ReviewDecision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "confirm" => Ok(ReviewDecision::Confirm),
            "reject" => Ok(ReviewDecision::Reject),
            other => match other.strip_prefix("relabel:") {
                Some(label) => Ok(ReviewDecision::Relabel(label.trim().parse()?)),
                None => Err(Error::Schema { record: other.into(), message: "expected confirm, reject or relabel:<bias>".into() }),
            },
        }
    }
}

pub fn load_review(path: impl AsRef<Path>) -> Result<BTreeMap<String, ReviewDecision>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| Error::Schema { record: path.display().to_string(), message: e.to_string() })?;
    raw.into_iter().map(|(id, d)| Ok((id, d.parse()?))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReviewSummary {
    pub candidates: usize,
    /// Confirmed plus relabelled.
    pub accepted: usize,
    /// Accepted with the judge's proposed type.
    pub confirmed: usize,
    pub relabelled: usize,
    pub rejected: usize,
    pub unreviewed: usize,
}

pub fn summarize_review(records: &[CueRecord]) -> ReviewSummary {
    let count = |s: ReviewStatus| records.iter().filter(|r| r.review_status == s).count();
    let confirmed = count(ReviewStatus::Confirmed);
    let relabelled = count(ReviewStatus::Relabelled);
    ReviewSummary {
        candidates: records.len(),
        accepted: confirmed + relabelled,
        confirmed,
        relabelled,
        rejected: count(ReviewStatus::Rejected),
        unreviewed: count(ReviewStatus::Unreviewed),
    }
}

/// Overwrites judge proposals with review decisions.
pub fn apply_review(records: &[CueRecord], review: &BTreeMap<String, ReviewDecision>) -> Result<Vec<CueRecord>> {
    let known: HashSet<&str> = records.iter().map(|r| r.prompt_id.as_str()).collect();
    if let Some(unknown) = review.keys().find(|id| !known.contains(id.as_str())) {
        return Err(Error::Data(format!("review names unknown prompt `{unknown}`")));
    }
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            match review.get(&r.prompt_id) {
                None => {}
                Some(ReviewDecision::Confirm) => {
                    r.review_status = ReviewStatus::Confirmed;
                    r.final_bias = Some(r.proposed_bias);
                }
                Some(ReviewDecision::Reject) => {
                    r.review_status = ReviewStatus::Rejected;
                    r.final_bias = None;
                }
                Some(ReviewDecision::Relabel(b)) if *b == r.proposed_bias => {
                    return Err(Error::Data(format!("relabel of `{}` keeps the proposed type {b}", r.prompt_id)));
                }
                Some(ReviewDecision::Relabel(b)) => {
                    r.review_status = ReviewStatus::Relabelled;
                    r.final_bias = Some(*b);
                }
            }
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCue {
    pub reference_id: String,
    pub bias_type: BiasType,
    pub span: String,
}

pub fn load_references(path: impl AsRef<Path>) -> Result<Vec<ReferenceCue>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let refs: Vec<ReferenceCue> =
        serde_json::from_str(&text).map_err(|e| Error::Schema { record: path.display().to_string(), message: e.to_string() })?;
    let mut seen = HashSet::new();
    for r in &refs {
        if !seen.insert(r.reference_id.as_str()) {
            return Err(Error::Data(format!("duplicate reference_id `{}`", r.reference_id)));
        }
    }
    Ok(refs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub reference_id: String,
    pub span: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub prompt_id: String,
    pub bias_type: BiasType,
    pub cue_span: String,
    pub candidates: Vec<RankedCandidate>,
    /// `None` when skipped or the judge reply was unusable.
    pub judge_match: Option<bool>,
    pub matched_substrings: Vec<String>,
    pub skipped: Option<String>,
    /// Filled from the manual alignment review.
    pub manual_validation: Option<bool>,
}

impl AlignmentResult {
    pub fn validated(&self) -> bool {
        self.judge_match == Some(true) && self.manual_validation == Some(true)
    }
}

/// Ranks same-bias references by TF-IDF cosine similarity; ties go to the smaller id.
pub struct ReferenceIndex<'a> {
    refs: &'a [ReferenceCue],
    index: TfIdfIndex,
}

impl<'a> ReferenceIndex<'a> {
    pub fn new(refs: &'a [ReferenceCue]) -> Self {
        let spans: Vec<&str> = refs.iter().map(|r| r.span.as_str()).collect();
        ReferenceIndex { refs, index: TfIdfIndex::new(&spans) }
    }

    pub fn top_k(&self, query: &str, bias: BiasType, k: usize) -> Vec<RankedCandidate> {
        let pool = self.refs.iter().enumerate().filter(|(_, r)| r.bias_type == bias).map(|(i, _)| i);
        let mut scored = self.index.scores(query, pool);
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| self.refs[a.index].reference_id.cmp(&self.refs[b.index].reference_id)));
        scored
            .into_iter()
            .take(k)
            .map(|s| RankedCandidate { reference_id: self.refs[s.index].reference_id.clone(), span: self.refs[s.index].span.clone(), score: s.score })
            .collect()
    }
}

fn align_one(record: &CueRecord, index: &ReferenceIndex<'_>, judge: &Judge<'_>, k: usize) -> Result<(AlignmentResult, Option<MiningFailure>)> {
    let bias = record.final_bias.unwrap_or(record.proposed_bias);
    let candidates = index.top_k(&record.cue_span, bias, k);
    let mut result = AlignmentResult {
        prompt_id: record.prompt_id.clone(),
        bias_type: bias,
        cue_span: record.cue_span.clone(),
        candidates,
        judge_match: None,
        matched_substrings: Vec::new(),
        skipped: None,
        manual_validation: None,
    };
    if result.candidates.is_empty() {
        result.skipped = Some(format!("no reference cues of type {bias}"));
        return Ok((result, None));
    }
    let listing: Vec<String> = result.candidates.iter().enumerate().map(|(i, c)| format!("{}. {}", i + 1, c.span)).collect();
    let bundle = judge.prompts.alignment.render(&[("cue", &record.cue_span), ("bias", bias.as_str()), ("candidates", &listing.join("\n"))]);
    let reply = judge.ask(&bundle)?;
    let fail = match parse_alignment(&reply) {
        Err(e) => Some(failure(&record.prompt_id, "alignment", "unparseable", e)),
        Ok((false, _)) => {
            result.judge_match = Some(false);
            None
        }
        Ok((true, subs)) => {
            let lower = record.cue_span.to_lowercase();
            result.matched_substrings = subs.into_iter().filter(|s| lower.contains(&s.to_lowercase())).collect();
            if result.matched_substrings.is_empty() {
                result.judge_match = Some(false);
                Some(failure(&record.prompt_id, "alignment", "non_verbatim", "match claimed without a substring of the cue"))
            } else {
                result.judge_match = Some(true);
                None
            }
        }
    };
    Ok((result, fail))
}

/// Aligns every accepted cue with its `k` most similar same-type references.
pub fn align_cues(
    records: &[CueRecord],
    references: &[ReferenceCue],
    judge: &Judge<'_>,
    k: usize,
) -> Result<(Vec<AlignmentResult>, Vec<MiningFailure>)> {
    let index = ReferenceIndex::new(references);
    let accepted: Vec<&CueRecord> = records.iter().filter(|r| r.is_positive()).collect();
    let aligned = judge.par_map(&accepted, |r| align_one(r, &index, judge, k))?;
    let mut results = Vec::with_capacity(aligned.len());
    let mut failures = Vec::new();
    for (r, f) in aligned {
        results.push(r);
        failures.extend(f);
    }
    Ok((results, failures))
}

/// Manual validation of judge-proposed matches: prompt_id → keep.
pub fn apply_alignment_review(results: &mut [AlignmentResult], review: &BTreeMap<String, bool>) -> Result<()> {
    let index: HashMap<String, usize> = results.iter().enumerate().map(|(i, r)| (r.prompt_id.clone(), i)).collect();
    for (id, keep) in review {
        let i = *index.get(id).ok_or_else(|| Error::Data(format!("alignment review names unknown prompt `{id}`")))?;
        if *keep && results[i].judge_match != Some(true) {
            return Err(Error::Data(format!("alignment review keeps `{id}`, which the judge did not match")));
        }
        results[i].manual_validation = Some(*keep);
    }
    Ok(())
}

pub fn load_alignment_review(path: impl AsRef<Path>) -> Result<BTreeMap<String, bool>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema { record: path.display().to_string(), message: e.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Denominators {
    pub corpus_prompts: u64,
    pub coding_prompts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPrevalence {
    pub bias_type: String,
    pub count: u64,
    pub percent_of_coding: f64,
    pub judge_matches: u64,
    pub aligned: u64,
    pub aligned_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub corpus_prompts: u64,
    pub coding_prompts: u64,
    pub candidates: u64,
    pub accepted: u64,
    pub type_stable: u64,
    pub rejected: u64,
    pub relabelled: u64,
    pub accepted_of_candidates_percent: Option<f64>,
    pub type_stable_percent: Option<f64>,
    pub percent_of_coding: f64,
    pub percent_of_corpus: f64,
    pub judge_matches: u64,
    pub aligned: u64,
    pub alignment: Option<ProportionEstimate>,
    pub per_bias: Vec<BiasPrevalence>,
    pub tfidf_variant: String,
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn prevalence(records: &[CueRecord], alignment: &[AlignmentResult], den: Denominators) -> Result<PrevalenceReport> {
    if den.coding_prompts == 0 || den.corpus_prompts == 0 {
        return Err(StatsError::Domain("prevalence denominators must be positive".into()).into());
    }
    let summary = summarize_review(records);
    let accepted = summary.accepted as u64;
    let by_prompt: HashMap<&str, &AlignmentResult> = alignment.iter().map(|a| (a.prompt_id.as_str(), a)).collect();
    let mut per_bias: Vec<BiasPrevalence> = BiasType::ALL
        .iter()
        .map(|b| {
            let members: Vec<&CueRecord> = records.iter().filter(|r| r.is_positive() && r.final_bias == Some(*b)).collect();
            let count = members.len() as u64;
            let aligned_of = |pred: fn(&AlignmentResult) -> bool| {
                members.iter().filter(|r| by_prompt.get(r.prompt_id.as_str()).is_some_and(|a| pred(a))).count() as u64
            };
            let aligned = aligned_of(AlignmentResult::validated);
            BiasPrevalence {
                bias_type: b.as_str().into(),
                count,
                percent_of_coding: 100.0 * count as f64 / den.coding_prompts as f64,
                judge_matches: aligned_of(|a| a.judge_match == Some(true)),
                aligned,
                aligned_percent: pct(aligned, count),
            }
        })
        .collect();
    per_bias.sort_by_key(|b| std::cmp::Reverse(b.count));
    let judge_matches = per_bias.iter().map(|b| b.judge_matches).sum();
    let aligned = per_bias.iter().map(|b| b.aligned).sum();
    Ok(PrevalenceReport {
        corpus_prompts: den.corpus_prompts,
        coding_prompts: den.coding_prompts,
        candidates: summary.candidates as u64,
        accepted,
        type_stable: summary.confirmed as u64,
        rejected: summary.rejected as u64,
        relabelled: summary.relabelled as u64,
        accepted_of_candidates_percent: pct(accepted, summary.candidates as u64),
        type_stable_percent: pct(summary.confirmed as u64, accepted),
        percent_of_coding: 100.0 * accepted as f64 / den.coding_prompts as f64,
        percent_of_corpus: 100.0 * accepted as f64 / den.corpus_prompts as f64,
        judge_matches,
        aligned,
        alignment: if accepted > 0 { Some(wilson_ci(aligned, accepted, 0.95)?) } else { None },
        per_bias,
        tfidf_variant: TFIDF_VARIANT.into(),
    })
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.2}"))
}

/// Per-bias counts and alignment shares plus an `all` row.
pub fn prevalence_csv(report: &PrevalenceReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bias_type", "count", "percent_of_coding", "judge_matches", "aligned", "aligned_percent"])?;
    for b in &report.per_bias {
        w.write_record([
            b.bias_type.clone(),
            b.count.to_string(),
            fmt2(Some(b.percent_of_coding)),
            b.judge_matches.to_string(),
            b.aligned.to_string(),
            fmt2(b.aligned_percent),
        ])?;
    }
    w.write_record([
        "all".to_string(),
        report.accepted.to_string(),
        fmt2(Some(report.percent_of_coding)),
        report.judge_matches.to_string(),
        report.aligned.to_string(),
        fmt2(pct(report.aligned, report.accepted)),
    ])?;
    let bytes = w.into_inner().map_err(|e| Error::Render(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Inputs of a full mining pass.
pub struct MiningInputs<'a> {
    pub corpus: &'a [CorpusText],
    pub scores: &'a HashMap<String, f64>,
    pub threshold: f64,
    pub review: &'a BTreeMap<String, ReviewDecision>,
    pub references: &'a [ReferenceCue],
    pub alignment_review: &'a BTreeMap<String, bool>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub triaged: u64,
    pub extraction: ExtractionOutcome,
    pub reviewed: Vec<CueRecord>,
    pub review_summary: ReviewSummary,
    pub alignment: Vec<AlignmentResult>,
    pub failures: Vec<MiningFailure>,
    pub prevalence: PrevalenceReport,
}

pub fn run_mining(inputs: &MiningInputs<'_>, judge: &Judge<'_>) -> Result<MiningReport> {
    let triaged = triage(inputs.corpus, inputs.scores, inputs.threshold)?;
    let extraction = filter_and_extract(&triaged, judge)?;
    let reviewed = apply_review(&extraction.candidates, inputs.review)?;
    let (mut alignment, align_failures) = align_cues(&reviewed, inputs.references, judge, inputs.k)?;
    apply_alignment_review(&mut alignment, inputs.alignment_review)?;
    let den = Denominators { corpus_prompts: inputs.corpus.len() as u64, coding_prompts: extraction.coding.len() as u64 };
    let prevalence = prevalence(&reviewed, &alignment, den)?;
    let mut failures = extraction.failures.clone();
    failures.extend(align_failures);
    Ok(MiningReport {
        triaged: triaged.len() as u64,
        review_summary: summarize_review(&reviewed),
        extraction,
        reviewed,
        alignment,
        failures,
        prevalence,
    })
}

/// Headline lines for terminal output.
pub fn summary_lines(report: &MiningReport) -> Vec<String> {
    let p = &report.prevalence;
    let mut lines = vec![
        format!("corpus prompts: {}", p.corpus_prompts),
        format!("triaged: {}", report.triaged),
        format!("coding prompts: {}", p.coding_prompts),
        format!("cue-positive candidates: {}", p.candidates),
        format!("confirmed: {}/{} ({}%)", p.accepted, p.candidates, fmt2(p.accepted_of_candidates_percent)),
        format!("rejected: {}", p.rejected),
        format!("type-stable: {}/{} ({}%)", p.type_stable, p.accepted, fmt2(p.type_stable_percent)),
        format!("of coding prompts: {}/{} = {:.2}%", p.accepted, p.coding_prompts, p.percent_of_coding),
        format!("of all prompts: {}/{} = {:.2}%", p.accepted, p.corpus_prompts, p.percent_of_corpus),
        format!("judge-proposed alignments: {}/{}", p.judge_matches, p.accepted),
    ];
    if let Some(a) = &p.alignment {
        lines.push(format!(
            "aligned after validation: {}/{} ({:.2}%, Wilson 95% CI [{:.2}, {:.2}]%)",
            a.successes,
            a.trials,
            100.0 * a.point,
            100.0 * a.lower,
            100.0 * a.upper
        ));
    }
    for b in &p.per_bias {
        lines.push(format!("  {}: {} ({:.2}% of coding), aligned {}", b.bias_type, b.count, b.percent_of_coding, fmt2(b.aligned_percent)));
    }
    lines
}

pub fn write_mining(report: &MiningReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, rows) in [("candidates.jsonl", &report.extraction.candidates), ("reviewed.jsonl", &report.reviewed)] {
        let path = dir.join(name);
        if path.exists() {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
        let mut w = JsonlAppender::open(path)?;
        for r in rows {
            w.append(r)?;
        }
        w.flush()?;
    }
    let path = dir.join("failures.jsonl");
    if path.exists() {
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
    }
    let mut w = JsonlAppender::open(path)?;
    for f in &report.failures {
        w.append(f)?;
    }
    w.flush()?;
    write_file(dir.join("coding_prompts.json"), &serde_json::to_string_pretty(&report.extraction.coding)?)?;
    write_file(dir.join("alignment.json"), &serde_json::to_string_pretty(&report.alignment)?)?;
    write_file(dir.join("table1.csv"), &prevalence_csv(&report.prevalence)?)?;
    write_file(dir.join("table1.json"), &serde_json::to_string_pretty(&report.prevalence)?)?;
    write_file(dir.join("summary.txt"), &(summary_lines(report).join("\n") + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, ModelEndpoint, StubBackend, StubRule, StubScript};
    use std::sync::Arc;

    fn corpus(items: &[(&str, &str)]) -> Vec<CorpusText> {
        items.iter().map(|(id, t)| CorpusText { prompt_id: id.to_string(), text: t.to_string() }).collect()
    }

    #[test]
    fn triage_is_strict() {
        let c = corpus(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let scores: HashMap<String, f64> = [("a", 0.6), ("b", 0.61), ("c", 0.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let kept = triage(&c, &scores, 0.6).unwrap();
        assert_eq!(kept.iter().map(|p| p.prompt_id.as_str()).collect::<Vec<_>>(), vec!["b"]);
        let mut missing = scores.clone();
        missing.remove("c");
        match triage(&c, &missing, 0.6) {
            Err(Error::Data(m)) => assert!(m.contains("`c`")),
            other => panic!("{other:?}"),
        }
    }

    fn rule(user: &str, system: &str, response: &str) -> StubRule {
        StubRule { user_contains: Some(user.into()), system_contains: Some(system.into()), response: response.into(), ..Default::default() }
    }

    #[test]
    fn extraction_keeps_only_verbatim_spans() {
        let script = StubScript {
            rules: vec![
                rule("", "screen", "Coding: yes"),
                rule("Am I right", "steer", "Cue: Am I right\nBias: confirmation"),
                rule("paraphrase", "steer", "Cue: Everyone agrees\nBias: bandwagon"),
                rule("garbled", "steer", "I cannot tell"),
                rule("", "steer", "Cue: none\nBias: none"),
            ],
            ..Default::default()
        };
        let gw = Gateway::new(Arc::new(StubBackend::new(script)));
        let ep = ModelEndpoint::new("judge", "stub://");
        let prompts = JudgePrompts::default();
        let judge = Judge { gateway: &gw, endpoint: &ep, prompts: &prompts, workers: 3 };
        let items: Vec<CorpusPrompt> = [
            ("p1", "We don't need that second if. Am I right?"),
            ("p2", "a paraphrase case"),
            ("p3", "garbled reply"),
            ("p4", "plain code question"),
        ]
        .iter()
        .map(|(id, t)| CorpusPrompt { prompt_id: id.to_string(), text: t.to_string(), classifier_score: 0.9 })
        .collect();
        let out = filter_and_extract(&items, &judge).unwrap();
        assert_eq!(out.coding.len(), 4);
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.candidates[0].cue_span, "Am I right");
        assert_eq!(out.candidates[0].proposed_bias, BiasType::Confirmation);
        let kinds: Vec<(&str, &str)> = out.failures.iter().map(|f| (f.prompt_id.as_str(), f.kind.as_str())).collect();
        assert_eq!(kinds, vec![("p2", "non_verbatim"), ("p3", "unparseable")]);
    }

    fn cue(id: &str, bias: BiasType) -> CueRecord {
        CueRecord { prompt_id: id.into(), cue_span: "s".into(), proposed_bias: bias, review_status: ReviewStatus::Unreviewed, final_bias: None }
    }

    #[test]
    fn review_rules() {
        let recs = vec![cue("a", BiasType::Framing), cue("b", BiasType::Framing), cue("c", BiasType::Anchoring)];
        assert_eq!(apply_review(&recs, &BTreeMap::new()).unwrap(), recs);
        let review: BTreeMap<String, ReviewDecision> =
            [("a", "confirm"), ("b", "reject"), ("c", "relabel:framing")].iter().map(|(k, v)| (k.to_string(), v.parse().unwrap())).collect();
        let out = apply_review(&recs, &review).unwrap();
        assert_eq!(out[0].final_bias, Some(BiasType::Framing));
        assert_eq!(out[2].review_status, ReviewStatus::Relabelled);
        let s = summarize_review(&out);
        assert_eq!((s.accepted, s.confirmed, s.relabelled, s.rejected), (2, 1, 1, 1));
        let unknown: BTreeMap<String, ReviewDecision> = [("zz".to_string(), ReviewDecision::Confirm)].into();
        assert!(apply_review(&recs, &unknown).is_err());
        let same: BTreeMap<String, ReviewDecision> = [("c".to_string(), ReviewDecision::Relabel(BiasType::Anchoring))].into();
        assert!(apply_review(&recs, &same).is_err());
    }

    #[test]
    fn retrieval_self_similarity_and_ties() {
        let refs = vec![
            ReferenceCue { reference_id: "r2".into(), bias_type: BiasType::Confirmation, span: "am I right".into() },
            ReferenceCue { reference_id: "r1".into(), bias_type: BiasType::Confirmation, span: "unrelated words".into() },
            ReferenceCue { reference_id: "r0".into(), bias_type: BiasType::Confirmation, span: "other text".into() },
            ReferenceCue { reference_id: "r9".into(), bias_type: BiasType::Framing, span: "am I right".into() },
        ];
        let idx = ReferenceIndex::new(&refs);
        let top = idx.top_k("Am I right", BiasType::Confirmation, 25);
        assert_eq!(top.len(), 3);
        assert_eq!(top[0].reference_id, "r2");
        assert!((top[0].score - 1.0).abs() < 1e-12);
        assert_eq!(top[1].reference_id, "r0");
        assert_eq!(top[2].reference_id, "r1");
        assert!(idx.top_k("x", BiasType::Hindsight, 25).is_empty());
    }

    #[test]
    fn prevalence_arithmetic() {
        let mut recs = Vec::new();
        for i in 0..30 {
            recs.push(CueRecord { review_status: ReviewStatus::Confirmed, final_bias: Some(BiasType::Confirmation), ..cue(&format!("c{i}"), BiasType::Confirmation) });
        }
        let r = prevalence(&recs, &[], Denominators { corpus_prompts: 35_784, coding_prompts: 5_269 }).unwrap();
        assert_eq!(format!("{:.2}", r.per_bias[0].percent_of_coding), "0.57");
        assert_eq!(r.per_bias[0].bias_type, "confirmation");
        assert!(prevalence(&recs, &[], Denominators { corpus_prompts: 1, coding_prompts: 0 }).is_err());
    }
}
