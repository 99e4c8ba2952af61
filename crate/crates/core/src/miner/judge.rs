//! Judge prompt templates and parsers for the judge's line-oriented replies.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, ModelEndpoint};
use crate::model::BiasType;
use crate::strategy::{after_last_marker, Phase, PromptBundle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeTemplate {
    pub system: String,
    /// `{prompt}`, `{cue}`, `{bias}` and `{candidates}` are substituted.
    pub user_template: String,
}

impl JudgeTemplate {
    pub fn render(&self, vars: &[(&str, &str)]) -> PromptBundle {
        let mut user = self.user_template.clone();
        for (name, value) in vars {
            user = user.replace(&format!("{{{name}}}"), value);
        }
        PromptBundle { system_instruction: self.system.clone(), user_message: user, phase: Phase::Judge }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePrompts {
    pub coding_filter: JudgeTemplate,
    pub cue_extraction: JudgeTemplate,
    pub alignment: JudgeTemplate,
}

const CODING_SYSTEM: &str = "You screen prompts that developers sent to a coding assistant. \
Decide whether the prompt concerns software development, such as writing, reviewing, debugging, testing, \
designing or deploying code. Reply with one line: `Coding: yes` or `Coding: no`.";

const EXTRACTION_SYSTEM: &str = "You look for explicit wording in a developer prompt that could steer an assistant \
towards a biased answer. Bias types: anchoring, availability, bandwagon, confirmation, framing, hindsight, \
hyperbolic discounting, overconfidence. Report at most one cue, copied character for character from the prompt, and its \
single primary bias type. Do not paraphrase and do not infer cues that are not written out. Reply with two lines:\n\
Cue: <exact span from the prompt, or none>\n\
Bias: <bias type, or none>";

const ALIGNMENT_SYSTEM: &str = "You compare a cue phrase from a developer prompt with reference cue phrases of the same \
bias type. A match means shared surface wording (the same words or the same fixed expression), not just a shared topic.\n\n\
Example 1\nCue: Am I right\nReference cues:\n1. I'm right about this, aren't I?\nMatch: yes\nMatched: right\n\n\
Example 2\nCue: everyone on my team already uses it\nReference cues:\n1. this is the most popular option\nMatch: no\nMatched: none\n\n\
Reply with two lines:\nMatch: <yes or no>\nMatched: <substrings of the cue shared with a reference, separated by ' | ', or none>";

impl Default for JudgePrompts {
    fn default() -> Self {
        JudgePrompts {
            coding_filter: JudgeTemplate { system: CODING_SYSTEM.into(), user_template: "Prompt:\n<<<\n{prompt}\n>>>".into() },
            cue_extraction: JudgeTemplate { system: EXTRACTION_SYSTEM.into(), user_template: "Prompt:\n<<<\n{prompt}\n>>>".into() },
            alignment: JudgeTemplate {
                system: ALIGNMENT_SYSTEM.into(),
                user_template: "Cue: {cue}\nBias type: {bias}\nReference cues:\n{candidates}".into(),
            },
        }
    }
}

impl JudgePrompts {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema { record: path.display().to_string(), message: e.to_string() })
    }
}

/// A judge endpoint plus its prompts and worker count.
pub struct Judge<'a> {
    pub gateway: &'a Gateway,
    pub endpoint: &'a ModelEndpoint,
    pub prompts: &'a JudgePrompts,
    pub workers: usize,
}

impl Judge<'_> {
    pub fn ask(&self, bundle: &PromptBundle) -> Result<String> {
        Ok(self.gateway.complete(self.endpoint, bundle, 0)?.response.text)
    }

    /// Applies `f` to every item on a bounded pool; results keep input order.
    pub fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
        let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..self.workers.clamp(1, items.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= items.len() {
                        break;
                    }
                    let r = f(&items[i]);
                    slots.lock().expect("result slots poisoned")[i] = Some(r);
                });
            }
        });
        slots.into_inner().expect("result slots poisoned").into_iter().map(|r| r.expect("every slot filled")).collect()
    }
}

fn first_line_after<'a>(raw: &'a str, marker: &str) -> Option<&'a str> {
    let start = after_last_marker(raw, marker)?;
    Some(raw[start..].lines().next().unwrap_or("").trim())
}

fn is_none_word(v: &str) -> bool {
    let v = v.trim_matches(|c: char| !c.is_alphanumeric());
    v.is_empty() || v.eq_ignore_ascii_case("none") || v.eq_ignore_ascii_case("n/a")
}

fn yes_no(v: &str) -> Option<bool> {
    let word = v.trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

fn strip_quotes(v: &str) -> &str {
    let v = v.trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('`', '`'), ('“', '”')] {
        if let Some(inner) = v.strip_prefix(open).and_then(|s| s.strip_suffix(close)) {
            return inner;
        }
    }
    v
}

pub fn parse_coding(raw: &str) -> std::result::Result<bool, String> {
    let line = first_line_after(raw, "Coding:").ok_or("no `Coding:` line")?;
    yes_no(line).ok_or_else(|| format!("`Coding:` value `{line}` is not yes/no"))
}

/// `Ok(None)` when the judge reports no cue.
pub fn parse_extraction(raw: &str) -> std::result::Result<Option<(String, BiasType)>, String> {
    let cue = first_line_after(raw, "Cue:").ok_or("no `Cue:` line")?;
    if is_none_word(cue) {
        return Ok(None);
    }
    let bias = first_line_after(raw, "Bias:").ok_or("cue given without a `Bias:` line")?;
    if is_none_word(bias) {
        return Err("cue given with bias `none`".into());
    }
    let bias = parse_bias_label(bias).ok_or_else(|| format!("unknown bias label `{bias}`"))?;
    Ok(Some((strip_quotes(cue).to_string(), bias)))
}

/// Accepts `Hyperbolic discounting`, `hyperbolic-discounting` and `hyperbolic` alike.
pub fn parse_bias_label(raw: &str) -> Option<BiasType> {
    let label: String = raw
        .trim()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_lowercase() })
        .collect();
    match label.as_str() {
        "hyperbolic" => Some(BiasType::HyperbolicDiscounting),
        other => other.parse().ok(),
    }
}

pub fn parse_alignment(raw: &str) -> std::result::Result<(bool, Vec<String>), String> {
    let verdict = first_line_after(raw, "Match:").ok_or("no `Match:` line")?;
    let matched = yes_no(verdict).ok_or_else(|| format!("`Match:` value `{verdict}` is not yes/no"))?;
    let subs = match first_line_after(raw, "Matched:") {
        Some(v) if !is_none_word(v) => v.split('|').map(|s| strip_quotes(s).to_string()).filter(|s| !s.is_empty()).collect(),
        _ => Vec::new(),
    };
    Ok((matched, subs))
}
