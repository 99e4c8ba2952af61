use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BiasType, ComplexityTier, Condition, Decision, DilemmaPair, TrialRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSensitivity {
    pub model_id: String,
    pub strategy_id: String,
    pub pair_id: String,
    pub paired_runs: u32,
    pub flips: u32,
    pub valid_paired_runs: u32,
    /// flips / valid_paired_runs; `None` when no paired run is valid.
    pub rate: Option<f64>,
}

/// How the runs of the two conditions are combined into paired observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Biased run i against unbiased run i.
    #[default]
    RunIndex,
    /// One paired observation: majority decision per condition.
    Majority,
}

fn majority(decisions: &[&Decision]) -> Decision {
    let a = decisions.iter().filter(|d| ***d == Decision::OptionA).count();
    let b = decisions.iter().filter(|d| ***d == Decision::OptionB).count();
    match a.cmp(&b) {
        std::cmp::Ordering::Greater => Decision::OptionA,
        std::cmp::Ordering::Less => Decision::OptionB,
        std::cmp::Ordering::Equal => Decision::invalid("no majority"),
    }
}

type GroupKey = (String, String, String);

/// Flip statistics per (model, strategy, pair). Output is sorted by that key.
pub fn compute_sensitivity(records: &[TrialRecord], pooling: Pooling) -> Result<Vec<PairSensitivity>> {
    let mut groups: BTreeMap<GroupKey, [BTreeMap<u32, &Decision>; 2]> = BTreeMap::new();
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.key()) {
            return Err(Error::Data(format!(
                "duplicate trial ({}, {}, {}, {}, run {})",
                r.model_id, r.strategy_id, r.pair_id, r.condition, r.run_index
            )));
        }
        let slot = match r.condition {
            Condition::Unbiased => 0,
            Condition::Biased => 1,
        };
        groups
            .entry((r.model_id.clone(), r.strategy_id.clone(), r.pair_id.clone()))
            .or_default()[slot]
            .insert(r.run_index, &r.decision);
    }

    let mut missing = Vec::new();
    for ((m, s, p), [unb, bia]) in &groups {
        for (have, other, cond) in [(unb, bia, Condition::Unbiased), (bia, unb, Condition::Biased)] {
            for run in other.keys().filter(|k| !have.contains_key(k)) {
                missing.push(format!("({m}, {s}, {p}, {cond}, run {run})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage { missing });
    }

    Ok(groups
        .into_iter()
        .map(|((model_id, strategy_id, pair_id), [unb, bia])| {
            let pairs: Vec<(Decision, Decision)> = match pooling {
                Pooling::RunIndex => unb.iter().map(|(run, u)| ((*u).clone(), bia[run].clone())).collect(),
                Pooling::Majority => {
                    let u: Vec<&Decision> = unb.values().copied().collect();
                    let b: Vec<&Decision> = bia.values().copied().collect();
                    vec![(majority(&u), majority(&b))]
                }
            };
            let valid: Vec<_> = pairs.iter().filter(|(u, b)| u.is_valid() && b.is_valid()).collect();
            let flips = valid.iter().filter(|(u, b)| u != b).count() as u32;
            let valid_paired_runs = valid.len() as u32;
            PairSensitivity {
                model_id,
                strategy_id,
                pair_id,
                paired_runs: pairs.len() as u32,
                flips,
                valid_paired_runs,
                rate: (valid_paired_runs > 0).then(|| flips as f64 / valid_paired_runs as f64),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Bias,
    Model,
    Tier,
    All,
}

impl Grouping {
    pub const ALL: [Grouping; 4] = [Grouping::Bias, Grouping::Model, Grouping::Tier, Grouping::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Bias => "bias",
            Grouping::Model => "model",
            Grouping::Tier => "tier",
            Grouping::All => "all",
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grouping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Grouping::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown grouping `{s}` (expected bias, model, tier or all)")))
    }
}

/// Per-pair attributes used for grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairInfo {
    pub bias_type: BiasType,
    pub tier: Option<ComplexityTier>,
}

pub fn pair_info(pairs: &[DilemmaPair]) -> HashMap<String, PairInfo> {
    pairs.iter().map(|p| (p.pair_id.clone(), PairInfo { bias_type: p.bias_type, tier: p.tier })).collect()
}

/// The sample of per-pair rates for one (group, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub grouping: Grouping,
    pub group: String,
    pub strategy_id: String,
    /// Defined per-pair rates in (model, pair) order.
    pub rates: Vec<f64>,
    /// Mean per-pair rate in percent; `None` for an empty group.
    pub mean_percent: Option<f64>,
    /// Total flips over total valid paired runs, in percent.
    pub pooled_percent: Option<f64>,
    pub flips: u64,
    pub valid_paired_runs: u64,
    pub paired_runs: u64,
    /// Pairs whose rate is undefined (no valid paired run).
    pub undefined_pairs: usize,
    /// Empty groups are reported but excluded from testing.
    pub empty: bool,
}

fn group_label(grouping: Grouping, s: &PairSensitivity, info: &HashMap<String, PairInfo>) -> Result<String> {
    let lookup = || info.get(&s.pair_id).ok_or_else(|| Error::Data(format!("pair `{}` not in dataset", s.pair_id)));
    Ok(match grouping {
        Grouping::All => "all".to_string(),
        Grouping::Model => s.model_id.clone(),
        Grouping::Bias => lookup()?.bias_type.as_str().to_string(),
        Grouping::Tier => lookup()?
            .tier
            .ok_or_else(|| Error::Data(format!("pair `{}` has no tier; run tier assignment first", s.pair_id)))?
            .as_str()
            .to_string(),
    })
}

/// Canonical row order for a grouping given the observed labels.
pub fn group_order(grouping: Grouping, observed: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut labels: Vec<String> = observed.into_iter().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let rank = |l: &str| -> usize {
        match grouping {
            Grouping::Bias => BiasType::ALL.iter().position(|b| b.as_str() == l).unwrap_or(usize::MAX),
            Grouping::Tier => ComplexityTier::ALL.iter().position(|t| t.as_str() == l).unwrap_or(usize::MAX),
            _ => 0,
        }
    };
    labels.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    labels
}

/// Groups per-pair rates by `grouping` and strategy. Every (group, strategy)
/// combination seen anywhere in the input appears in the output, possibly empty.
pub fn aggregate_sensitivity(
    sensitivities: &[PairSensitivity],
    grouping: Grouping,
    info: &HashMap<String, PairInfo>,
) -> Result<Vec<GroupSample>> {
    let mut cells: BTreeMap<(String, String), Vec<&PairSensitivity>> = BTreeMap::new();
    let mut groups = Vec::new();
    let mut strategies = Vec::new();
    for s in sensitivities {
        let g = group_label(grouping, s, info)?;
        groups.push(g.clone());
        strategies.push(s.strategy_id.clone());
        cells.entry((g, s.strategy_id.clone())).or_default().push(s);
    }
    strategies.sort();
    strategies.dedup();
    let mut out = Vec::new();
    for g in group_order(grouping, groups) {
        for strat in &strategies {
            let members = cells.get(&(g.clone(), strat.clone())).map(Vec::as_slice).unwrap_or(&[]);
            let rates: Vec<f64> = members.iter().filter_map(|s| s.rate).collect();
            let flips: u64 = members.iter().map(|s| s.flips as u64).sum();
            let valid: u64 = members.iter().map(|s| s.valid_paired_runs as u64).sum();
            let paired: u64 = members.iter().map(|s| s.paired_runs as u64).sum();
            let empty = rates.is_empty();
            out.push(GroupSample {
                grouping,
                group: g.clone(),
                strategy_id: strat.clone(),
                mean_percent: (!empty).then(|| 100.0 * rates.iter().sum::<f64>() / rates.len() as f64),
                pooled_percent: (valid > 0).then(|| 100.0 * flips as f64 / valid as f64),
                undefined_pairs: members.len() - rates.len(),
                rates,
                flips,
                valid_paired_runs: valid,
                paired_runs: paired,
                empty,
            });
        }
    }
    Ok(out)
}
