//! Human labels of open-ended responses: rater agreement, per-strategy biased
//! rates with bootstrap intervals, and paired differences against the baseline.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::write_file;
use crate::stats::{agreement, bootstrap_mean_ci, bootstrap_paired_diff_ci, Agreement, Interval};
use crate::strategy::{BASELINE_ID, PRESET_IDS};

/// `true` means the response was judged biased.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub item_id: String,
    pub strategy_id: String,
    pub rater_a: bool,
    pub rater_b: bool,
    #[serde(default)]
    pub adjudicated: Option<bool>,
}

impl LabelRecord {
    pub fn final_label(&self) -> Result<bool> {
        match (self.adjudicated, self.rater_a == self.rater_b) {
            (Some(l), _) => Ok(l),
            (None, true) => Ok(self.rater_a),
            (None, false) => Err(Error::Data(format!(
                "item `{}` under `{}`: raters disagree and no adjudicated label is given",
                self.item_id, self.strategy_id
            ))),
        }
    }
}

fn parse_flag(raw: &str, record: &str) -> Result<Option<bool>> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" | "na" => Ok(None),
        "1" | "true" | "yes" | "biased" => Ok(Some(true)),
        "0" | "false" | "no" | "unbiased" => Ok(Some(false)),
        other => Err(Error::Schema { record: record.into(), message: format!("label `{other}` is not boolean") }),
    }
}

/// CSV with columns `item_id,strategy_id,rater_a,rater_b[,adjudicated]`, or JSON lines.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return crate::runner::read_jsonl(path);
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::Schema { record: path.display().to_string(), message: format!("missing column `{name}`") });
    let (ci, cs, ca, cb) = (need("item_id")?, need("strategy_id")?, need("rater_a")?, need("rater_b")?);
    let cj = col("adjudicated");
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let loc = format!("{}:{}", path.display(), i + 2);
        let get = |c: usize| row.get(c).unwrap_or("");
        let required = |c: usize| parse_flag(get(c), &loc)?.ok_or_else(|| Error::Schema { record: loc.clone(), message: "missing rater label".into() });
        out.push(LabelRecord {
            item_id: get(ci).to_string(),
            strategy_id: get(cs).to_string(),
            rater_a: required(ca)?,
            rater_b: required(cb)?,
            adjudicated: match cj {
                Some(c) => parse_flag(get(c), &loc)?,
                None => None,
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRate {
    pub strategy_id: String,
    pub n: usize,
    pub biased: usize,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDifference {
    pub strategy_id: String,
    pub baseline_id: String,
    pub n_paired: usize,
    /// Baseline rate minus strategy rate over the shared items.
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAnalysis {
    pub agreement: Agreement,
    pub rates: Vec<StrategyRate>,
    pub differences: Vec<RateDifference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelOptions {
    pub baseline_id: String,
    pub resamples: usize,
    pub seed: u64,
    pub confidence: f64,
}

impl LabelOptions {
    pub fn new(seed: u64) -> Self {
        LabelOptions { baseline_id: BASELINE_ID.into(), resamples: 10_000, seed, confidence: 0.95 }
    }
}

fn strategy_rank(id: &str, baseline: &str) -> (usize, usize) {
    if id == baseline {
        return (0, 0);
    }
    match PRESET_IDS.iter().position(|p| *p == id) {
        Some(i) => (1, i),
        None => (2, 0),
    }
}

pub fn analyze_labels(records: &[LabelRecord], opts: &LabelOptions) -> Result<LabelAnalysis> {
    let a: Vec<bool> = records.iter().map(|r| r.rater_a).collect();
    let b: Vec<bool> = records.iter().map(|r| r.rater_b).collect();
    let agreement = agreement(&a, &b)?;

    let mut by_strategy: BTreeMap<&str, BTreeMap<&str, bool>> = BTreeMap::new();
    for r in records {
        let label = r.final_label()?;
        if by_strategy.entry(&r.strategy_id).or_default().insert(&r.item_id, label).is_some() {
            return Err(Error::Data(format!("item `{}` labelled twice under `{}`", r.item_id, r.strategy_id)));
        }
    }
    let mut order: Vec<&str> = by_strategy.keys().copied().collect();
    order.sort_by(|x, y| strategy_rank(x, &opts.baseline_id).cmp(&strategy_rank(y, &opts.baseline_id)).then(x.cmp(y)));

    let as_f = |l: bool| if l { 1.0 } else { 0.0 };
    let mut rates = Vec::new();
    for id in &order {
        let labels = &by_strategy[id];
        let values: Vec<f64> = labels.values().map(|&l| as_f(l)).collect();
        rates.push(StrategyRate {
            strategy_id: id.to_string(),
            n: values.len(),
            biased: labels.values().filter(|l| **l).count(),
            interval: bootstrap_mean_ci(&values, opts.resamples, opts.seed, opts.confidence)?,
        });
    }

    let mut differences = Vec::new();
    if let Some(base) = by_strategy.get(opts.baseline_id.as_str()) {
        for id in order.iter().filter(|id| **id != opts.baseline_id) {
            let other = &by_strategy[id];
            let shared: Vec<(f64, f64)> = base.iter().filter_map(|(item, &l)| other.get(item).map(|&o| (as_f(l), as_f(o)))).collect();
            if shared.is_empty() {
                continue;
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = shared.into_iter().unzip();
            differences.push(RateDifference {
                strategy_id: id.to_string(),
                baseline_id: opts.baseline_id.clone(),
                n_paired: xs.len(),
                interval: bootstrap_paired_diff_ci(&xs, &ys, opts.resamples, opts.seed, opts.confidence)?,
            });
        }
    }
    Ok(LabelAnalysis { agreement, rates, differences })
}

/// Bar data: one row per strategy with its rate, interval and difference to the baseline.
pub fn labels_csv(analysis: &LabelAnalysis) -> Result<String> {
    let diffs: HashMap<&str, &RateDifference> = analysis.differences.iter().map(|d| (d.strategy_id.as_str(), d)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["strategy_id", "n", "biased", "rate", "ci_lower", "ci_upper", "diff_vs_baseline", "diff_lower", "diff_upper"])?;
    for r in &analysis.rates {
        let f = |x: f64| format!("{x:.4}");
        let (d, dl, du) = diffs
            .get(r.strategy_id.as_str())
            .map_or(("NA".into(), "NA".into(), "NA".into()), |d| (f(d.interval.estimate), f(d.interval.lower), f(d.interval.upper)));
        w.write_record([
            r.strategy_id.clone(),
            r.n.to_string(),
            r.biased.to_string(),
            f(r.interval.estimate),
            f(r.interval.lower),
            f(r.interval.upper),
            d,
            dl,
            du,
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Render(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_labels(analysis: &LabelAnalysis, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    write_file(dir.join("fig7_labels.csv"), &labels_csv(analysis)?)?;
    write_file(dir.join("fig7_labels.json"), &serde_json::to_string_pretty(analysis)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(item: usize, strategy: &str, a: bool, b: bool, adj: Option<bool>) -> LabelRecord {
        LabelRecord { item_id: format!("i{item:02}"), strategy_id: strategy.into(), rater_a: a, rater_b: b, adjudicated: adj }
    }

    #[test]
    fn rates_and_differences() {
        let mut recs = Vec::new();
        for i in 0..40 {
            recs.push(rec(i, "∅", i < 16, i < 16, None));
            recs.push(rec(i, "sAX+BW+IsD", i < 11, i < 11, None));
        }
        let a = analyze_labels(&recs, &LabelOptions::new(11)).unwrap();
        assert_eq!(a.agreement.percent_agreement, 1.0);
        assert_eq!(a.rates[0].strategy_id, "∅");
        assert!((a.rates[0].interval.estimate - 0.4).abs() < 1e-12);
        assert!((a.rates[1].interval.estimate - 0.275).abs() < 1e-12);
        let d = &a.differences[0];
        assert!((d.interval.estimate - 0.125).abs() < 1e-12);
        assert!(d.interval.estimate > 0.0 && d.interval.upper >= d.interval.estimate);
        assert_eq!(a, analyze_labels(&recs, &LabelOptions::new(11)).unwrap());
    }

    #[test]
    fn disagreement_needs_adjudication() {
        assert!(analyze_labels(&[rec(0, "∅", true, false, None)], &LabelOptions::new(1)).is_err());
        let a = analyze_labels(&[rec(0, "∅", true, false, Some(false))], &LabelOptions::new(1)).unwrap();
        assert_eq!(a.rates[0].biased, 0);
        assert_eq!(a.agreement.matches, 0);
    }

    #[test]
    fn csv_loader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        std::fs::write(&p, "item_id,strategy_id,rater_a,rater_b,adjudicated\nx,∅,1,0,1\ny,∅,0,0,\n").unwrap();
        let recs = load_labels(&p).unwrap();
        assert_eq!(recs[0].adjudicated, Some(true));
        assert_eq!(recs[1].adjudicated, None);
        std::fs::write(&p, "item_id,strategy_id,rater_a,rater_b\nx,∅,maybe,0\n").unwrap();
        assert!(load_labels(&p).is_err());
    }
}
