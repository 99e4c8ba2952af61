//! Dataset ingestion and pair validation.
//!
//! The on-disk format is a single JSON array of pair objects:
//!
//! ```json
//! [{"pair_id": "...", "bias_type": "anchoring", "expected_decision": "option_a",
//!   "unbiased_text": "...", "biased_text": "...", "shared_axioms": "...",
//!   "unbiased_program": "...", "biased_program": "...", "inference_steps": 7}]
//! ```
//!
//! `inference_steps` and `tier` are optional. Any other field is kept verbatim
//! in [`DilemmaPair::extra`] and written back on save.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{
    BiasType, ComplexityTier, Condition, Decision, Dilemma, DilemmaPair, OPTION_A_LABEL, OPTION_B_LABEL,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PairRecord {
    pair_id: String,
    bias_type: String,
    expected_decision: String,
    unbiased_text: String,
    biased_text: String,
    shared_axioms: String,
    unbiased_program: String,
    biased_program: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inference_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tier: Option<ComplexityTier>,
    #[serde(flatten)]
    extra: serde_json::Map<String, Value>,
}

fn record_label(index: usize, value: &Value) -> String {
    match value.get("pair_id").and_then(Value::as_str) {
        Some(id) => format!("#{index} (pair_id `{id}`)"),
        None => format!("#{index}"),
    }
}

fn record_to_pair(rec: PairRecord) -> Result<DilemmaPair> {
    let bias_type: BiasType = rec.bias_type.parse()?;
    let expected_decision = Decision::from_atom(&rec.expected_decision)
        .unwrap_or_else(|| Decision::invalid(format!("declared `{}`", rec.expected_decision)));
    Ok(DilemmaPair {
        unbiased: Dilemma::new(format!("{}/unbiased", rec.pair_id), bias_type, Condition::Unbiased, rec.unbiased_text),
        biased: Dilemma::new(format!("{}/biased", rec.pair_id), bias_type, Condition::Biased, rec.biased_text),
        pair_id: rec.pair_id,
        bias_type,
        shared_axioms: rec.shared_axioms,
        unbiased_program: rec.unbiased_program,
        biased_program: rec.biased_program,
        expected_decision,
        inference_steps: rec.inference_steps,
        tier: rec.tier,
        extra: rec.extra,
    })
}

fn pair_to_record(pair: &DilemmaPair) -> PairRecord {
    let expected = match &pair.expected_decision {
        Decision::Invalid(_) => "invalid".to_string(),
        d => d.label().to_string(),
    };
    PairRecord {
        pair_id: pair.pair_id.clone(),
        bias_type: pair.bias_type.as_str().to_string(),
        expected_decision: expected,
        unbiased_text: pair.unbiased.text.clone(),
        biased_text: pair.biased.text.clone(),
        shared_axioms: pair.shared_axioms.clone(),
        unbiased_program: pair.unbiased_program.clone(),
        biased_program: pair.biased_program.clone(),
        inference_steps: pair.inference_steps,
        tier: pair.tier,
        extra: pair.extra.clone(),
    }
}

/// Parses a dataset document. Every returned pair satisfies the pair invariants.
pub fn parse_dataset(text: &str) -> Result<Vec<DilemmaPair>> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Schema { record: "document".into(), message: e.to_string() })?;
    let Value::Array(items) = doc else {
        return Err(Error::Schema { record: "document".into(), message: "expected a JSON array of pairs".into() });
    };

    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(items.len());
    for (index, item) in items.into_iter().enumerate() {
        let label = record_label(index, &item);
        let rec: PairRecord =
            serde_json::from_value(item).map_err(|e| Error::Schema { record: label, message: e.to_string() })?;
        if !seen.insert(rec.pair_id.clone()) {
            return Err(Error::DuplicatePair(rec.pair_id));
        }
        let pair = record_to_pair(rec)?;
        let violations = validate_pair(&pair);
        if !violations.is_empty() {
            return Err(Error::InvalidPair { pair_id: pair.pair_id, violations });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DilemmaPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn dataset_to_json(pairs: &[DilemmaPair]) -> Result<String> {
    let records: Vec<PairRecord> = pairs.iter().map(pair_to_record).collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

pub fn save_dataset(path: impl AsRef<Path>, pairs: &[DilemmaPair]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset_to_json(pairs)?).map_err(|e| Error::io(path, e))
}

/// Returns one human-readable entry per violated pair invariant; empty means valid.
pub fn validate_pair(pair: &DilemmaPair) -> Vec<String> {
    let mut violations = Vec::new();
    if pair.pair_id.trim().is_empty() {
        violations.push("pair_id is empty".to_string());
    }
    if pair.unbiased.condition != Condition::Unbiased {
        violations.push("unbiased dilemma carries condition `biased`".to_string());
    }
    if pair.biased.condition != Condition::Biased {
        violations.push("biased dilemma carries condition `unbiased`".to_string());
    }
    for dilemma in [&pair.unbiased, &pair.biased] {
        let cond = dilemma.condition;
        if dilemma.bias_type != pair.bias_type {
            violations.push(format!(
                "{cond} dilemma bias_type `{}` differs from pair bias_type `{}`",
                dilemma.bias_type, pair.bias_type
            ));
        }
        if dilemma.text.trim().is_empty() {
            violations.push(format!("{cond} text is empty"));
            continue;
        }
        let (a, b) = &dilemma.option_labels;
        if a != OPTION_A_LABEL || b != OPTION_B_LABEL {
            violations.push(format!("{cond} option labels must be `{OPTION_A_LABEL}`/`{OPTION_B_LABEL}`, got `{a}`/`{b}`"));
        }
        for label in [a, b] {
            if !dilemma.text.contains(label.as_str()) {
                violations.push(format!("{cond} text is missing option label `{label}`"));
            }
        }
    }
    if let Decision::Invalid(reason) = &pair.expected_decision {
        violations.push(format!("expected_decision must be option_a or option_b ({reason})"));
    }
    violations
}
