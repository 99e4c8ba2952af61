//! Ground-truth checks for dilemma pairs and complexity tiering.

use serde::{Deserialize, Serialize};

use super::parser::parse_program;
use super::solver::{CompiledProgram, SolveOptions};
use super::term::{Program, Term};
use crate::error::{Error, Result};
use crate::model::{ComplexityTier, Decision, DilemmaPair};

/// Name of the predicate whose unique solution is the normative decision.
pub const DECISION_PREDICATE: &str = "decision";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerification {
    pub pair_id: String,
    pub consistent: bool,
    pub unbiased_decision: Decision,
    pub biased_decision: Decision,
    pub unbiased_steps: u64,
    pub biased_steps: u64,
    pub unbiased_explored: u64,
    pub biased_explored: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

struct VariantOutcome {
    decision: Decision,
    steps: u64,
    explored: u64,
}

fn decision_query() -> Term {
    Term::compound(DECISION_PREDICATE, vec![Term::var("X")])
}

fn solve_variant(shared: &Program, variant_src: &str, opts: SolveOptions) -> Result<VariantOutcome> {
    let variant = parse_program(variant_src)?;
    let program = CompiledProgram::new(&Program::merged(&[shared, &variant]));
    let result = program.solve(&decision_query(), opts)?;
    let decision = if !result.success {
        Decision::invalid("no solution for decision(X)")
    } else {
        match result.bindings.get("X") {
            Some(Term::Atom(a)) => Decision::from_atom(a)
                .unwrap_or_else(|| Decision::invalid(format!("decision binding `{a}` is not option_a/option_b"))),
            Some(other) => Decision::invalid(format!("decision binding `{other}` is not an option atom")),
            None => Decision::invalid("decision(X) left X unbound"),
        }
    };
    Ok(VariantOutcome { decision, steps: result.steps, explored: result.explored })
}

/// Solves `decision(X)` under the shared axioms plus each variant program.
pub fn verify_pair(pair: &DilemmaPair) -> Result<PairVerification> {
    verify_pair_with(pair, SolveOptions::default())
}

pub fn verify_pair_with(pair: &DilemmaPair, opts: SolveOptions) -> Result<PairVerification> {
    let shared = parse_program(&pair.shared_axioms)?;
    let unbiased = solve_variant(&shared, &pair.unbiased_program, opts)?;
    let biased = solve_variant(&shared, &pair.biased_program, opts)?;

    let mut diagnostics = Vec::new();
    for (label, outcome) in [("unbiased", &unbiased), ("biased", &biased)] {
        if let Decision::Invalid(reason) = &outcome.decision {
            diagnostics.push(format!("{label}: {reason}"));
        }
    }
    let both_valid = unbiased.decision.is_valid() && biased.decision.is_valid();
    if both_valid && unbiased.decision != biased.decision {
        diagnostics.push(format!(
            "variants disagree: unbiased derives {}, biased derives {}",
            unbiased.decision.label(),
            biased.decision.label()
        ));
    }
    if both_valid && unbiased.decision == biased.decision && unbiased.decision != pair.expected_decision {
        diagnostics.push(format!(
            "derived {} but expected {}",
            unbiased.decision.label(),
            pair.expected_decision.label()
        ));
    }
    Ok(PairVerification {
        pair_id: pair.pair_id.clone(),
        consistent: diagnostics.is_empty(),
        unbiased_decision: unbiased.decision,
        biased_decision: biased.decision,
        unbiased_steps: unbiased.steps,
        biased_steps: biased.steps,
        unbiased_explored: unbiased.explored,
        biased_explored: biased.explored,
        diagnostics,
    })
}

/// Nearest-rank (inclusive) percentile of an ascending-sorted slice.
fn nearest_rank(sorted: &[u64], pct: u64) -> u64 {
    let n = sorted.len() as u64;
    let rank = (pct * n).div_ceil(100).max(1);
    sorted[(rank - 1) as usize]
}

/// The 25th/50th/75th nearest-rank percentiles.
pub fn quartile_cutoffs(steps: &[u64]) -> Result<[u64; 3]> {
    if steps.is_empty() {
        return Err(Error::Data("cannot compute tiers of an empty step distribution".into()));
    }
    let mut sorted = steps.to_vec();
    sorted.sort_unstable();
    Ok([nearest_rank(&sorted, 25), nearest_rank(&sorted, 50), nearest_rank(&sorted, 75)])
}

/// Boundary values belong to the lower tier.
pub fn tier_for(steps: u64, cutoffs: &[u64; 3]) -> ComplexityTier {
    if steps <= cutoffs[0] {
        ComplexityTier::Low
    } else if steps <= cutoffs[1] {
        ComplexityTier::MidLow
    } else if steps <= cutoffs[2] {
        ComplexityTier::MidHigh
    } else {
        ComplexityTier::High
    }
}

pub fn tiers_from_steps(steps: &[(String, u64)]) -> Result<Vec<(String, ComplexityTier)>> {
    let values: Vec<u64> = steps.iter().map(|(_, s)| *s).collect();
    let cutoffs = quartile_cutoffs(&values)?;
    Ok(steps.iter().map(|(id, s)| (id.clone(), tier_for(*s, &cutoffs))).collect())
}

/// Uses stored `inference_steps` where present, else the unbiased variant's proof length.
pub fn assign_tiers(pairs: &[DilemmaPair]) -> Result<Vec<(String, ComplexityTier)>> {
    let steps = pairs
        .iter()
        .map(|p| {
            let s = match p.inference_steps {
                Some(s) => s,
                None => verify_pair(p)?.unbiased_steps,
            };
            Ok((p.pair_id.clone(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    tiers_from_steps(&steps)
}
