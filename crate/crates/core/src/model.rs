//! Domain vocabulary: bias families, dilemma pairs, decisions and trial records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const OPTION_A_LABEL: &str = "Option A";
pub const OPTION_B_LABEL: &str = "Option B";

/// The eight bias families covered by the benchmark. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasType {
    Anchoring,
    Availability,
    Bandwagon,
    Confirmation,
    Framing,
    Hindsight,
    HyperbolicDiscounting,
    Overconfidence,
}

impl BiasType {
    pub const ALL: [BiasType; 8] = [
        BiasType::Anchoring,
        BiasType::Availability,
        BiasType::Bandwagon,
        BiasType::Confirmation,
        BiasType::Framing,
        BiasType::Hindsight,
        BiasType::HyperbolicDiscounting,
        BiasType::Overconfidence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BiasType::Anchoring => "anchoring",
            BiasType::Availability => "availability",
            BiasType::Bandwagon => "bandwagon",
            BiasType::Confirmation => "confirmation",
            BiasType::Framing => "framing",
            BiasType::Hindsight => "hindsight",
            BiasType::HyperbolicDiscounting => "hyperbolic_discounting",
            BiasType::Overconfidence => "overconfidence",
        }
    }
}

impl fmt::Display for BiasType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiasType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BiasType::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::Vocabulary(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Unbiased,
    Biased,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Unbiased => "unbiased",
            Condition::Biased => "biased",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parsed model decision. `Invalid` always carries a non-empty reason.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    OptionA,
    OptionB,
    Invalid(String),
}

impl Decision {
    pub fn invalid(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        if reason.trim().is_empty() {
            Decision::Invalid("unspecified".to_string())
        } else {
            Decision::Invalid(reason)
        }
    }

    pub fn is_valid(&self) -> bool {
        !matches!(self, Decision::Invalid(_))
    }

    /// Maps the Horn-program atoms `option_a`/`option_b`.
    pub fn from_atom(atom: &str) -> Option<Self> {
        match atom {
            "option_a" => Some(Decision::OptionA),
            "option_b" => Some(Decision::OptionB),
            _ => None,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Decision::OptionA => "option_a",
            Decision::OptionB => "option_b",
            Decision::Invalid(_) => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dilemma {
    pub id: String,
    pub bias_type: BiasType,
    pub condition: Condition,
    pub text: String,
    pub option_labels: (String, String),
}

impl Dilemma {
    pub fn new(id: impl Into<String>, bias_type: BiasType, condition: Condition, text: impl Into<String>) -> Self {
        Dilemma {
            id: id.into(),
            bias_type,
            condition,
            text: text.into(),
            option_labels: (OPTION_A_LABEL.to_string(), OPTION_B_LABEL.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityTier {
    Low,
    MidLow,
    MidHigh,
    High,
}

impl ComplexityTier {
    pub const ALL: [ComplexityTier; 4] =
        [ComplexityTier::Low, ComplexityTier::MidLow, ComplexityTier::MidHigh, ComplexityTier::High];

    pub fn as_str(self) -> &'static str {
        match self {
            ComplexityTier::Low => "low",
            ComplexityTier::MidLow => "mid_low",
            ComplexityTier::MidHigh => "mid_high",
            ComplexityTier::High => "high",
        }
    }
}

impl fmt::Display for ComplexityTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A biased/unbiased dilemma pair sharing one decision task and one Horn-clause ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DilemmaPair {
    pub pair_id: String,
    pub bias_type: BiasType,
    pub unbiased: Dilemma,
    pub biased: Dilemma,
    pub shared_axioms: String,
    pub unbiased_program: String,
    pub biased_program: String,
    pub expected_decision: Decision,
    pub inference_steps: Option<u64>,
    pub tier: Option<ComplexityTier>,
    /// Unknown record fields, carried through load/save untouched.
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl DilemmaPair {
    pub fn dilemma(&self, condition: Condition) -> &Dilemma {
        match condition {
            Condition::Unbiased => &self.unbiased,
            Condition::Biased => &self.biased,
        }
    }
}

/// One model response for (pair, condition, strategy, model, run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub model_id: String,
    pub strategy_id: String,
    pub pair_id: String,
    pub condition: Condition,
    pub run_index: u32,
    pub raw_text: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elicited_cues: Option<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub timestamp: String,
}

pub type TrialKey = (String, String, String, Condition, u32);

impl TrialRecord {
    pub fn key(&self) -> TrialKey {
        (
            self.model_id.clone(),
            self.strategy_id.clone(),
            self.pair_id.clone(),
            self.condition,
            self.run_index,
        )
    }
}
