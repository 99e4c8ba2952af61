//! Heatmap-style result tables and their CSV/JSON exports.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::{GroupSample, Grouping};
use crate::stats::StatResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub value_percent: Option<f64>,
    pub r_rb: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub stars: String,
    /// Row-normalised z-score (population standard deviation).
    pub z: Option<f64>,
    pub best_in_row: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapTable {
    pub figure_id: String,
    pub grouping: String,
    pub baseline_id: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    /// `cells[row][column]`.
    pub cells: Vec<Vec<HeatmapCell>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Config(format!("unknown export format `{other}` (expected csv or json)"))),
        }
    }
}

pub fn comparison_id(grouping: Grouping, group: &str, strategy_id: &str) -> String {
    format!("{grouping}/{group}/{strategy_id}")
}

/// Figure identifier used in export file names.
pub fn figure_id(grouping: Grouping) -> &'static str {
    match grouping {
        Grouping::Bias | Grouping::All => "fig2",
        Grouping::Model => "fig3",
        Grouping::Tier => "fig4",
    }
}

/// z = (x - mean) / population stdev over the defined values; a constant row gives zeros.
pub fn row_z_scores(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return vec![None; values.len()];
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let var = defined.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let scale = defined.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    values
        .iter()
        .map(|v| v.map(|x| if sd <= 1e-12 * scale { 0.0 } else { (x - mean) / sd }))
        .collect()
}

const TIE_TOLERANCE: f64 = 1e-9;

/// Builds a strategy-by-group table. `columns` fixes the column order and must
/// contain the baseline.
pub fn render_sensitivity_table(
    figure_id: &str,
    grouping: Grouping,
    samples: &[GroupSample],
    stats: &[StatResult],
    baseline_id: &str,
    columns: &[String],
) -> Result<HeatmapTable> {
    if columns.is_empty() || samples.is_empty() {
        return Err(Error::Render("table has no rows or no columns".into()));
    }
    if !columns.iter().any(|c| c == baseline_id) {
        return Err(Error::Render(format!("baseline `{baseline_id}` is not among the columns")));
    }
    let mut rows: Vec<String> = Vec::new();
    let mut by_cell: HashMap<(&str, &str), &GroupSample> = HashMap::new();
    for s in samples {
        if !rows.contains(&s.group) {
            rows.push(s.group.clone());
        }
        by_cell.insert((s.group.as_str(), s.strategy_id.as_str()), s);
    }
    let stat_by_id: HashMap<&str, &StatResult> = stats.iter().map(|s| (s.comparison_id.as_str(), s)).collect();

    let mut cells = Vec::with_capacity(rows.len());
    for row in &rows {
        let baseline_defined = by_cell.get(&(row.as_str(), baseline_id)).is_some_and(|s| !s.empty);
        let mut row_cells = Vec::with_capacity(columns.len());
        for col in columns {
            let sample = by_cell.get(&(row.as_str(), col.as_str()));
            let value = sample.and_then(|s| s.mean_percent);
            let mut cell = HeatmapCell { value_percent: value, r_rb: None, p: None, q: None, stars: String::new(), z: None, best_in_row: false };
            if col != baseline_id && value.is_some() && baseline_defined {
                let id = comparison_id(grouping, row, col);
                let stat = stat_by_id
                    .get(id.as_str())
                    .ok_or_else(|| Error::Render(format!("no test result for cell ({row}, {col})")))?;
                cell.r_rb = Some(stat.r_rb);
                cell.p = Some(stat.p);
                cell.q = Some(stat.q);
                cell.stars = stat.stars.clone();
            }
            row_cells.push(cell);
        }
        let z = row_z_scores(&row_cells.iter().map(|c| c.value_percent).collect::<Vec<_>>());
        for (c, z) in row_cells.iter_mut().zip(z) {
            c.z = z;
        }
        let best = columns
            .iter()
            .zip(&row_cells)
            .filter(|(col, _)| *col != baseline_id)
            .filter_map(|(_, c)| c.value_percent)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
        if let Some(best) = best {
            for (col, c) in columns.iter().zip(row_cells.iter_mut()) {
                if col != baseline_id && c.value_percent.is_some_and(|v| (v - best).abs() <= TIE_TOLERANCE) {
                    c.best_in_row = true;
                }
            }
        }
        cells.push(row_cells);
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("value".into(), "mean per-pair flip rate, percent".into());
    metadata.insert("z".into(), "row-normalised, population standard deviation".into());
    metadata.insert("stars".into(), "BH-adjusted q: * < .05, ** < .01, *** < .001".into());
    metadata.insert("r_rb".into(), "rank-biserial vs baseline; positive = lower sensitivity".into());
    Ok(HeatmapTable {
        figure_id: figure_id.to_string(),
        grouping: grouping.as_str().to_string(),
        baseline_id: baseline_id.to_string(),
        row_labels: rows,
        column_labels: columns.to_vec(),
        cells,
        metadata,
    })
}

fn fmt_r(r: f64) -> String {
    let r = if r.abs() < 0.005 { 0.0 } else { r };
    format!("{r:.2}")
}

/// `"<value>% (r=<r_rb>)<stars>"`; the baseline column has no effect size.
pub fn format_cell(cell: &HeatmapCell) -> String {
    let Some(v) = cell.value_percent else { return "NA".to_string() };
    match cell.r_rb {
        Some(r) => format!("{v:.1}% (r={}){}", fmt_r(r), cell.stars),
        None => format!("{v:.1}%{}", cell.stars),
    }
}

impl HeatmapTable {
    fn check(&self) -> Result<()> {
        if self.row_labels.is_empty() || self.column_labels.is_empty() {
            return Err(Error::Render(format!("table {}_{} has no rows", self.figure_id, self.grouping)));
        }
        if self.cells.len() != self.row_labels.len() || self.cells.iter().any(|r| r.len() != self.column_labels.len()) {
            return Err(Error::Render("cell matrix does not match the labels".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        self.check()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.grouping.clone()];
        header.extend(self.column_labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.row_labels.iter().zip(&self.cells) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(format_cell));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Render(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        self.check()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: HeatmapTable = serde_json::from_str(text)?;
        t.check()?;
        Ok(t)
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.figure_id, self.grouping)
    }
}

pub fn export(table: &HeatmapTable, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    let body = match format {
        ExportFormat::Csv => table.to_csv()?,
        ExportFormat::Json => table.to_json()?,
    };
    write_file(path, &body)
}

/// Writes `<figure-id>_<grouping>.csv` and `.json` into `dir`.
pub fn export_all(table: &HeatmapTable, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    let csv_path = dir.join(format!("{}.csv", table.file_stem()));
    let json_path = dir.join(format!("{}.json", table.file_stem()));
    export(table, ExportFormat::Csv, &csv_path)?;
    export(table, ExportFormat::Json, &json_path)?;
    Ok((csv_path, json_path))
}

pub fn load_table(path: impl AsRef<Path>) -> Result<HeatmapTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    HeatmapTable::from_json(&text)
}

pub(crate) fn write_file(path: impl AsRef<Path>, body: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(group: &str, strategy: &str, mean: f64) -> GroupSample {
        GroupSample {
            grouping: Grouping::Bias,
            group: group.into(),
            strategy_id: strategy.into(),
            rates: vec![mean / 100.0],
            mean_percent: Some(mean),
            pooled_percent: Some(mean),
            flips: 0,
            valid_paired_runs: 1,
            paired_runs: 1,
            undefined_pairs: 0,
            empty: false,
        }
    }

    fn stat(group: &str, strategy: &str, r: f64, q: f64) -> StatResult {
        StatResult {
            comparison_id: comparison_id(Grouping::Bias, group, strategy),
            statistic: 0.0,
            r_rb: r,
            p: q,
            q,
            stars: crate::stats::stars(q).to_string(),
        }
    }

    fn cols(c: &[&str]) -> Vec<String> {
        c.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn best_in_row_and_cell_format() {
        let samples = vec![sample("all", "∅", 12.9), sample("all", "BW+IsD", 8.3)];
        let stats = vec![stat("all", "BW+IsD", 0.21, 0.03)];
        let t = render_sensitivity_table("fig2", Grouping::Bias, &samples, &stats, "∅", &cols(&["∅", "BW+IsD"])).unwrap();
        assert!(t.cells[0][1].best_in_row && !t.cells[0][0].best_in_row);
        assert_eq!(format_cell(&t.cells[0][1]), "8.3% (r=0.21)*");
        assert_eq!(format_cell(&t.cells[0][0]), "12.9%");
        assert_eq!(t.to_csv().unwrap(), "bias,∅,BW+IsD\nall,12.9%,8.3% (r=0.21)*\n");
    }

    #[test]
    fn z_scores_population() {
        let z = row_z_scores(&[Some(10.0), Some(20.0), Some(30.0)]);
        let expect = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in z.iter().zip(expect) {
            assert!((a.unwrap() - b).abs() < 1e-12);
        }
        assert_eq!(row_z_scores(&[Some(5.0), Some(5.0)]), vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn ties_all_marked() {
        let samples = vec![sample("r", "∅", 10.0), sample("r", "A", 5.0), sample("r", "B", 5.0), sample("r", "C", 7.0)];
        let stats = vec![stat("r", "A", 0.1, 0.5), stat("r", "B", 0.1, 0.5), stat("r", "C", 0.1, 0.5)];
        let t = render_sensitivity_table("fig2", Grouping::Bias, &samples, &stats, "∅", &cols(&["∅", "A", "B", "C"])).unwrap();
        let marks: Vec<bool> = t.cells[0].iter().map(|c| c.best_in_row).collect();
        assert_eq!(marks, vec![false, true, true, false]);
    }

    #[test]
    fn missing_stat_names_cell() {
        let samples = vec![sample("framing", "∅", 10.0), sample("framing", "CoT", 5.0)];
        match render_sensitivity_table("fig2", Grouping::Bias, &samples, &[], "∅", &cols(&["∅", "CoT"])) {
            Err(Error::Render(m)) => assert!(m.contains("(framing, CoT)")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip_and_empty_rejected() {
        let samples = vec![sample("all", "∅", 12.9), sample("all", "BW", 11.0)];
        let stats = vec![stat("all", "BW", -0.1, 0.2)];
        let t = render_sensitivity_table("fig2", Grouping::Bias, &samples, &stats, "∅", &cols(&["∅", "BW"])).unwrap();
        assert_eq!(HeatmapTable::from_json(&t.to_json().unwrap()).unwrap(), t);
        assert!(render_sensitivity_table("fig2", Grouping::Bias, &[], &[], "∅", &cols(&["∅"])).is_err());
        let empty = HeatmapTable { row_labels: vec![], cells: vec![], ..t };
        assert!(empty.to_csv().is_err());
    }
}
