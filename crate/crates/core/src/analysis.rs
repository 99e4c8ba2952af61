//! Strategy-versus-baseline comparisons over grouped per-pair flip rates.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::horn::assign_tiers;
use crate::model::{DilemmaPair, TrialRecord};
use crate::report::{comparison_id, export_all, figure_id, render_sensitivity_table, write_file, HeatmapTable};
use crate::runner::{aggregate_sensitivity, compute_sensitivity, pair_info, GroupSample, Grouping, PairSensitivity, Pooling};
use crate::stats::{bh_adjust, mann_whitney, rank_biserial, stars, StatResult};
use crate::strategy::{BASELINE_ID, PRESET_IDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdrFamily {
    /// All comparisons of one grouping's table.
    #[default]
    PerFigure,
    PerRow,
    PerColumn,
}

impl std::str::FromStr for FdrFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_figure" => Ok(FdrFamily::PerFigure),
            "per_row" => Ok(FdrFamily::PerRow),
            "per_column" => Ok(FdrFamily::PerColumn),
            other => Err(Error::Config(format!("unknown FDR family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub groupings: Vec<Grouping>,
    pub alpha: f64,
    pub fdr_family: FdrFamily,
    pub pooling: Pooling,
    pub baseline_id: String,
    /// Column order; strategies not listed follow in preset order, then by id.
    pub strategy_order: Vec<String>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            groupings: Grouping::ALL.to_vec(),
            alpha: 0.05,
            fdr_family: FdrFamily::PerFigure,
            pooling: Pooling::RunIndex,
            baseline_id: BASELINE_ID.to_string(),
            strategy_order: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingAnalysis {
    pub grouping: Grouping,
    pub samples: Vec<GroupSample>,
    pub stats: Vec<StatResult>,
    pub table: HeatmapTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityAnalysis {
    pub options: AnalysisOptions,
    pub sensitivities: Vec<PairSensitivity>,
    pub groupings: Vec<GroupingAnalysis>,
}

fn column_order(observed: &[String], opts: &AnalysisOptions) -> Vec<String> {
    let rank = |id: &str| -> (usize, usize) {
        if id == opts.baseline_id {
            return (0, 0);
        }
        if let Some(i) = opts.strategy_order.iter().position(|s| s == id) {
            return (1, i);
        }
        match PRESET_IDS.iter().position(|s| *s == id) {
            Some(i) => (2, i),
            None => (3, 0),
        }
    };
    let mut cols = observed.to_vec();
    cols.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    cols.dedup();
    cols
}

/// Fills tiers for pairs that lack one, from stored or recomputed step counts.
pub fn ensure_tiers(pairs: &[DilemmaPair]) -> Result<Vec<DilemmaPair>> {
    let mut out = pairs.to_vec();
    if out.iter().all(|p| p.tier.is_some()) {
        return Ok(out);
    }
    let tiers: HashMap<String, _> = assign_tiers(pairs)?.into_iter().collect();
    for p in &mut out {
        if p.tier.is_none() {
            p.tier = tiers.get(&p.pair_id).copied();
        }
    }
    Ok(out)
}

struct Comparison {
    row: String,
    column: String,
    u: f64,
    r_rb: f64,
    p: f64,
}

fn compare_grouping(samples: &[GroupSample], baseline: &str) -> Result<Vec<Comparison>> {
    let by_cell: HashMap<(&str, &str), &GroupSample> =
        samples.iter().map(|s| ((s.group.as_str(), s.strategy_id.as_str()), s)).collect();
    let mut out = Vec::new();
    for s in samples {
        if s.strategy_id == baseline || s.empty {
            continue;
        }
        let Some(base) = by_cell.get(&(s.group.as_str(), baseline)).filter(|b| !b.empty) else { continue };
        let mw = mann_whitney(&base.rates, &s.rates)?;
        out.push(Comparison {
            row: s.group.clone(),
            column: s.strategy_id.clone(),
            u: mw.u,
            r_rb: rank_biserial(&base.rates, &s.rates)?,
            p: mw.p_two_sided,
        });
    }
    Ok(out)
}

fn adjust(comparisons: &[Comparison], family: FdrFamily) -> Result<Vec<f64>> {
    let key = |c: &Comparison| match family {
        FdrFamily::PerFigure => String::new(),
        FdrFamily::PerRow => c.row.clone(),
        FdrFamily::PerColumn => c.column.clone(),
    };
    let mut families: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in comparisons.iter().enumerate() {
        families.entry(key(c)).or_default().push(i);
    }
    let mut q = vec![1.0; comparisons.len()];
    for members in families.values() {
        let ps: Vec<f64> = members.iter().map(|&i| comparisons[i].p).collect();
        for (&i, qi) in members.iter().zip(bh_adjust(&ps)?) {
            q[i] = qi;
        }
    }
    Ok(q)
}

pub fn analyze_grouping(
    sensitivities: &[PairSensitivity],
    pairs: &[DilemmaPair],
    grouping: Grouping,
    opts: &AnalysisOptions,
) -> Result<GroupingAnalysis> {
    let info = pair_info(pairs);
    let samples = aggregate_sensitivity(sensitivities, grouping, &info)?;
    let comparisons = compare_grouping(&samples, &opts.baseline_id)?;
    let q = adjust(&comparisons, opts.fdr_family)?;
    let stats: Vec<StatResult> = comparisons
        .iter()
        .zip(q)
        .map(|(c, q)| StatResult {
            comparison_id: comparison_id(grouping, &c.row, &c.column),
            statistic: c.u,
            r_rb: c.r_rb,
            p: c.p,
            q,
            stars: stars(q).to_string(),
        })
        .collect();
    let observed: Vec<String> = samples.iter().map(|s| s.strategy_id.clone()).collect();
    let columns = column_order(&observed, opts);
    let mut table = render_sensitivity_table(figure_id(grouping), grouping, &samples, &stats, &opts.baseline_id, &columns)?;
    let family = match opts.fdr_family {
        FdrFamily::PerFigure => "per_figure",
        FdrFamily::PerRow => "per_row",
        FdrFamily::PerColumn => "per_column",
    };
    table.metadata.insert("fdr_family".into(), family.into());
    let pooling = match opts.pooling {
        Pooling::RunIndex => "run_index",
        Pooling::Majority => "majority",
    };
    table.metadata.insert("pooling".into(), pooling.into());
    Ok(GroupingAnalysis { grouping, samples, stats, table })
}

/// Per-pair sensitivities, grouped samples, tests and tables for every requested grouping.
pub fn analyze_sensitivity(records: &[TrialRecord], pairs: &[DilemmaPair], opts: &AnalysisOptions) -> Result<SensitivityAnalysis> {
    if records.is_empty() {
        return Err(Error::Data("trial archive is empty".into()));
    }
    let sensitivities = compute_sensitivity(records, opts.pooling)?;
    if !sensitivities.iter().any(|s| s.strategy_id == opts.baseline_id) {
        return Err(Error::Data(format!("archive has no trials for baseline `{}`", opts.baseline_id)));
    }
    let pairs = if opts.groupings.contains(&Grouping::Tier) { ensure_tiers(pairs)? } else { pairs.to_vec() };
    let groupings = opts
        .groupings
        .iter()
        .map(|&g| analyze_grouping(&sensitivities, &pairs, g, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityAnalysis { options: opts.clone(), sensitivities, groupings })
}

/// Writes tables, test results and per-pair rates; returns the written paths.
pub fn write_analysis(analysis: &SensitivityAnalysis, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for g in &analysis.groupings {
        let (c, j) = export_all(&g.table, dir)?;
        written.push(c);
        written.push(j);
    }
    let sens_path = dir.join("pair_sensitivity.json");
    write_file(&sens_path, &serde_json::to_string_pretty(&analysis.sensitivities)?)?;
    written.push(sens_path);
    let groups: Vec<&GroupSample> = analysis.groupings.iter().flat_map(|g| &g.samples).collect();
    let groups_path = dir.join("group_samples.json");
    write_file(&groups_path, &serde_json::to_string_pretty(&groups)?)?;
    written.push(groups_path);
    let stats: Vec<&StatResult> = analysis.groupings.iter().flat_map(|g| &g.stats).collect();
    let stats_path = dir.join("stat_results.json");
    write_file(&stats_path, &serde_json::to_string_pretty(&stats)?)?;
    written.push(stats_path);
    Ok(written)
}
