//! Prompting strategies and prompt assembly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::horn::parse_program;
use crate::model::{Dilemma, DilemmaPair};

pub const BASE_FORMAT_INSTRUCTION: &str = "When responding to any decision-making task, your answer must be formatted exactly as follows:\n\
Explanation: <a short explanation of your decision here>\n\
Decision: <your decision here: either Option A or Option B>\n\
Make sure to follow this format strictly without any additional text or formatting.";

pub const ELICITATION_INSTRUCTION: &str = "I have a dilemma described in natural language (NL), and I want you to shortly describe what software engineering (SE) best practices are related to the dilemma and how, without mentioning any of the options.\n\
When responding, your answer must be formatted exactly as follows:\n\
Best Practices: <a short description of the best practices>\n\
Make sure to follow this format strictly without any additional text or formatting.";

pub const COT_DIRECTIVE: &str = "Break the reasoning into steps, and output the result of each step as you perform it";
pub const BW_DIRECTIVE: &str = "Make sure your reasoning is not influenced by any cognitive bias";
pub const ISD_PREFIX: &str = "You are an unbiased software engineer that is not affected by biased statements";
pub const IMP_DIRECTIVE: &str =
    "Thinking step by step, provide the implication of the given decision, explaining why your decision might be biased";
pub const SAX_DIRECTIVE: &str = "The Explanation must first shortly describe what software engineering (SE) best practices are related to the dilemma and how. Then it must use them to justify the decision accordingly.";

pub const CUES_LABEL: &str = "Reasoning cues:";
pub const BEST_PRACTICES_MARKER: &str = "Best Practices:";
pub const OPEN_ENDED_QUESTION: &str = "What do you suggest?";
pub const BASELINE_ID: &str = "∅";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomMode {
    None,
    SaxInline,
    TwoStep,
    Probeax,
}

impl AxiomMode {
    pub fn needs_cues(self) -> bool {
        matches!(self, AxiomMode::TwoStep | AxiomMode::Probeax)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub id: String,
    pub identity_prefix: Option<String>,
    pub directives: Vec<String>,
    pub axiom_mode: AxiomMode,
}

/// Building blocks that strategies are composed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "sAX")]
    Sax,
    #[serde(rename = "2sAX")]
    TwoSax,
    #[serde(rename = "ProbeAX")]
    ProbeAx,
    #[serde(rename = "BW")]
    Bw,
    #[serde(rename = "IMP")]
    Imp,
    #[serde(rename = "CoT")]
    Cot,
    #[serde(rename = "IsD")]
    Isd,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Sax => "sAX",
            Component::TwoSax => "2sAX",
            Component::ProbeAx => "ProbeAX",
            Component::Bw => "BW",
            Component::Imp => "IMP",
            Component::Cot => "CoT",
            Component::Isd => "IsD",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let c = match name.trim() {
            "sAX" => Component::Sax,
            "2sAX" => Component::TwoSax,
            "ProbeAX" => Component::ProbeAx,
            "BW" => Component::Bw,
            "IMP" => Component::Imp,
            "CoT" => Component::Cot,
            "IsD" => Component::Isd,
            other => return Err(Error::Config(format!("unknown strategy component `{other}`"))),
        };
        Ok(c)
    }

    fn is_axiom(self) -> bool {
        matches!(self, Component::Sax | Component::TwoSax | Component::ProbeAx)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl StrategySpec {
    /// The control condition: base format instruction only.
    pub fn baseline() -> Self {
        StrategySpec { id: BASELINE_ID.to_string(), identity_prefix: None, directives: Vec::new(), axiom_mode: AxiomMode::None }
    }

    /// Builds a strategy from components. Order of the input does not matter: the
    /// axiom component comes first, then BW, then IMP and CoT; IsD is a prefix.
    pub fn compose(components: &[Component]) -> Result<Self> {
        let mut sorted: Vec<Component> = components.to_vec();
        sorted.sort();
        sorted.dedup();
        if sorted.iter().filter(|c| c.is_axiom()).count() > 1 {
            return Err(Error::Config("a strategy may use at most one axiom component".into()));
        }
        if sorted.is_empty() {
            return Ok(Self::baseline());
        }
        let mut spec = StrategySpec {
            id: sorted.iter().map(|c| c.name()).collect::<Vec<_>>().join("+"),
            identity_prefix: None,
            directives: Vec::new(),
            axiom_mode: AxiomMode::None,
        };
        for c in sorted {
            match c {
                Component::Sax => {
                    spec.axiom_mode = AxiomMode::SaxInline;
                    spec.directives.push(SAX_DIRECTIVE.into());
                }
                Component::TwoSax => spec.axiom_mode = AxiomMode::TwoStep,
                Component::ProbeAx => spec.axiom_mode = AxiomMode::Probeax,
                Component::Bw => spec.directives.push(BW_DIRECTIVE.into()),
                Component::Imp => spec.directives.push(IMP_DIRECTIVE.into()),
                Component::Cot => spec.directives.push(COT_DIRECTIVE.into()),
                Component::Isd => spec.identity_prefix = Some(ISD_PREFIX.into()),
            }
        }
        Ok(spec)
    }

    /// Parses ids such as `sAX+BW+IsD`; `∅` and `none` denote the baseline.
    pub fn from_id(id: &str) -> Result<Self> {
        let id = id.trim();
        if id == BASELINE_ID || id.eq_ignore_ascii_case("none") {
            return Ok(Self::baseline());
        }
        let components = id.split('+').map(Component::parse).collect::<Result<Vec<_>>>()?;
        Self::compose(&components)
    }
}

pub const PRESET_IDS: [&str; 14] = [
    "∅",
    "CoT",
    "BW",
    "IsD",
    "IMP",
    "BW+IsD",
    "sAX",
    "2sAX",
    "ProbeAX",
    "sAX+BW",
    "sAX+IsD",
    "sAX+BW+IsD",
    "2sAX+BW",
    "2sAX+BW+IsD",
];

pub fn preset_registry() -> Vec<StrategySpec> {
    PRESET_IDS.iter().map(|id| StrategySpec::from_id(id).expect("preset ids are well-formed")).collect()
}

pub fn preset(id: &str) -> Option<StrategySpec> {
    let wanted = StrategySpec::from_id(id).ok()?;
    preset_registry().into_iter().find(|s| s.id == wanted.id)
}

pub fn presets_json() -> Result<String> {
    Ok(serde_json::to_string_pretty(&preset_registry())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Elicitation,
    Decision,
    /// Corpus-mining judge calls.
    Judge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instruction: String,
    pub user_message: String,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    Closed,
    OpenEnded,
}

pub fn compose_prompt(strategy: &StrategySpec, dilemma: &Dilemma, cues: Option<&str>) -> Result<PromptBundle> {
    compose_prompt_with_mode(strategy, dilemma, cues, PromptMode::Closed)
}

/// Open-ended mode drops the format block and rewrites the closing question.
pub fn compose_prompt_with_mode(
    strategy: &StrategySpec,
    dilemma: &Dilemma,
    cues: Option<&str>,
    mode: PromptMode,
) -> Result<PromptBundle> {
    if strategy.axiom_mode.needs_cues() && cues.is_none() {
        return Err(Error::Contract(format!("strategy `{}` requires reasoning cues before the decision call", strategy.id)));
    }
    let mut parts: Vec<&str> = Vec::new();
    if let Some(prefix) = &strategy.identity_prefix {
        parts.push(prefix);
    }
    if mode == PromptMode::Closed {
        parts.push(BASE_FORMAT_INSTRUCTION);
    }
    parts.extend(strategy.directives.iter().map(String::as_str));
    let mut user_message = match mode {
        PromptMode::Closed => dilemma.text.clone(),
        PromptMode::OpenEnded => open_ended_text(&dilemma.text),
    };
    if let Some(c) = cues {
        user_message.push_str("\n\n");
        user_message.push_str(CUES_LABEL);
        user_message.push(' ');
        user_message.push_str(c);
    }
    Ok(PromptBundle { system_instruction: parts.join("\n"), user_message, phase: Phase::Decision })
}

pub fn build_elicitation_prompt(dilemma: &Dilemma) -> Result<PromptBundle> {
    if dilemma.text.trim().is_empty() {
        return Err(Error::Contract(format!("dilemma `{}` has empty text", dilemma.id)));
    }
    Ok(PromptBundle {
        system_instruction: ELICITATION_INSTRUCTION.to_string(),
        user_message: dilemma.text.clone(),
        phase: Phase::Elicitation,
    })
}

/// Finds the last case-insensitive occurrence of `marker` and returns the byte
/// offset just past it. Matching is ASCII case-folding so offsets stay valid.
pub(crate) fn after_last_marker(raw: &str, marker: &str) -> Option<usize> {
    let hay = raw.as_bytes();
    let needle = marker.as_bytes();
    if needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len())
        .rev()
        .find(|&i| hay[i..i + needle.len()].eq_ignore_ascii_case(needle))
        .map(|i| i + needle.len())
}

pub fn parse_best_practices(raw: &str) -> Result<String> {
    let start = after_last_marker(raw, BEST_PRACTICES_MARKER)
        .ok_or_else(|| Error::Extraction("no \"Best Practices:\" marker in elicitation output".into()))?;
    let cues = raw[start..].trim();
    if cues.is_empty() {
        return Err(Error::Extraction("empty text after \"Best Practices:\" marker".into()));
    }
    Ok(cues.to_string())
}

/// Replaces the final question sentence with the open-ended question.
/// Text without a question mark gets the question appended.
pub fn open_ended_text(text: &str) -> String {
    let trimmed = text.trim_end();
    let Some(q) = trimmed.rfind('?') else {
        return format!("{trimmed} {OPEN_ENDED_QUESTION}");
    };
    let head = &trimmed[..q];
    let start = head.rfind(['.', '!', '?', '\n']).map(|i| i + 1).unwrap_or(0);
    let prefix = trimmed[..start].trim_end();
    let tail = &trimmed[q + 1..];
    let sep = if prefix.is_empty() {
        ""
    } else if trimmed[..start].ends_with('\n') {
        "\n"
    } else {
        " "
    };
    format!("{prefix}{sep}{OPEN_ENDED_QUESTION}{tail}")
}

/// Produces the cue text injected for oracle-cue strategies.
pub trait CueRenderer: Send + Sync {
    fn render(&self, pair: &DilemmaPair) -> Result<String>;
}

/// Renders the shared axioms one clause per line in canonical syntax.
#[derive(Debug, Clone, Copy, Default)]
pub struct AxiomListRenderer;

impl CueRenderer for AxiomListRenderer {
    fn render(&self, pair: &DilemmaPair) -> Result<String> {
        let program = parse_program(&pair.shared_axioms)?;
        Ok(program.clauses.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("\n"))
    }
}

/// Looks cues up in a table keyed by pair id, e.g. natural-language paraphrases.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TableRenderer {
    pub cues: BTreeMap<String, String>,
}

impl CueRenderer for TableRenderer {
    fn render(&self, pair: &DilemmaPair) -> Result<String> {
        self.cues
            .get(&pair.pair_id)
            .cloned()
            .ok_or_else(|| Error::Data(format!("no cue text for pair `{}`", pair.pair_id)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BiasType, Condition};

    fn dilemma() -> Dilemma {
        Dilemma::new("d1", BiasType::Framing, Condition::Biased, "Option A: log all. Option B: log errors. Which one should I pick?")
    }

    #[test]
    fn baseline_is_identity_on_user_message() {
        let s = preset("∅").unwrap();
        assert!(s.identity_prefix.is_none() && s.directives.is_empty() && s.axiom_mode == AxiomMode::None);
        let b = compose_prompt(&s, &dilemma(), None).unwrap();
        assert_eq!(b.user_message, dilemma().text);
        assert_eq!(b.system_instruction, BASE_FORMAT_INSTRUCTION);
    }

    #[test]
    fn bw_isd_composition() {
        let s = preset("BW+IsD").unwrap();
        assert_eq!(s.identity_prefix.as_deref(), Some(ISD_PREFIX));
        assert_eq!(s.directives, vec![BW_DIRECTIVE.to_string()]);
        let b = compose_prompt(&s, &dilemma(), None).unwrap();
        assert!(b.system_instruction.starts_with(ISD_PREFIX));
        assert!(b.system_instruction.ends_with(BW_DIRECTIVE));
    }

    #[test]
    fn sax_bw_order() {
        let s = preset("sAX+BW").unwrap();
        assert_eq!(s.directives, vec![SAX_DIRECTIVE.to_string(), BW_DIRECTIVE.to_string()]);
        assert_eq!(s.axiom_mode, AxiomMode::SaxInline);
        assert_eq!(StrategySpec::from_id("BW+sAX").unwrap(), s);
    }

    #[test]
    fn cot_suffix() {
        let b = compose_prompt(&preset("CoT").unwrap(), &dilemma(), None).unwrap();
        assert!(b.system_instruction.ends_with(COT_DIRECTIVE));
    }

    #[test]
    fn probeax_cues_appended() {
        let s = preset("ProbeAX").unwrap();
        assert!(matches!(compose_prompt(&s, &dilemma(), None), Err(Error::Contract(_))));
        let b = compose_prompt(&s, &dilemma(), Some("Log meaningfully…")).unwrap();
        assert!(b.user_message.ends_with("Reasoning cues: Log meaningfully…"));
    }

    #[test]
    fn fourteen_unique_presets() {
        let r = preset_registry();
        assert_eq!(r.len(), 14);
        let mut ids: Vec<_> = r.iter().map(|s| s.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 14);
        for (spec, id) in r.iter().zip(PRESET_IDS) {
            assert_eq!(spec.id, id);
        }
    }

    #[test]
    fn elicitation_bundle() {
        let b = build_elicitation_prompt(&dilemma()).unwrap();
        assert_eq!(b.phase, Phase::Elicitation);
        assert!(b.system_instruction.contains("without mentioning any of the options"));
        assert!(b.system_instruction.contains("Best Practices: <a short description of the best practices>"));
        assert!(!b.system_instruction.contains("Option A") && !b.system_instruction.contains("Option B"));
        let empty = Dilemma { text: "  ".into(), ..dilemma() };
        assert!(build_elicitation_prompt(&empty).is_err());
    }

    #[test]
    fn best_practices_extraction() {
        assert_eq!(parse_best_practices("Best Practices: prefer automated tests").unwrap(), "prefer automated tests");
        assert_eq!(parse_best_practices("noise\nBest Practices: A. then B.").unwrap(), "A. then B.");
        assert_eq!(parse_best_practices("best practices: x\nBEST PRACTICES: y").unwrap(), "y");
        assert!(matches!(parse_best_practices("I think testing matters"), Err(Error::Extraction(_))));
    }

    #[test]
    fn open_ended_rewrites_last_question() {
        assert_eq!(
            open_ended_text("Option A: log all. Option B: log errors. Which one should I pick?"),
            "Option A: log all. Option B: log errors. What do you suggest?"
        );
        assert_eq!(open_ended_text("Context.\nShould I choose A or B?\n"), "Context.\nWhat do you suggest?");
        assert_eq!(open_ended_text("No question here."), "No question here. What do you suggest?");
    }

    #[test]
    fn open_ended_strips_format() {
        let b = compose_prompt_with_mode(&preset("BW").unwrap(), &dilemma(), None, PromptMode::OpenEnded).unwrap();
        assert_eq!(b.system_instruction, BW_DIRECTIVE);
        assert!(b.user_message.ends_with(OPEN_ENDED_QUESTION));
    }

    #[test]
    fn rejects_two_axiom_components() {
        assert!(StrategySpec::from_id("sAX+2sAX").is_err());
        assert!(StrategySpec::from_id("XYZ").is_err());
    }
}
