use serde::{Deserialize, Serialize};

use super::{domain, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub n: usize,
    pub matches: usize,
    pub percent_agreement: f64,
    /// Cohen's kappa; `None` when chance agreement is 1.
    pub kappa: Option<f64>,
    /// Counts indexed [label_a][label_b] with false = 0, true = 1.
    pub table: [[usize; 2]; 2],
}

/// Percent agreement and Cohen's kappa for two binary label vectors.
pub fn agreement(labels_a: &[bool], labels_b: &[bool]) -> Result<Agreement, StatsError> {
    if labels_a.len() != labels_b.len() {
        return domain(format!("label vectors differ in length: {} vs {}", labels_a.len(), labels_b.len()));
    }
    if labels_a.is_empty() {
        return domain("agreement of empty label vectors");
    }
    let mut table = [[0usize; 2]; 2];
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        table[a as usize][b as usize] += 1;
    }
    let n = labels_a.len();
    let nf = n as f64;
    let matches = table[0][0] + table[1][1];
    let p_o = matches as f64 / nf;
    let a1 = (table[1][0] + table[1][1]) as f64 / nf;
    let b1 = (table[0][1] + table[1][1]) as f64 / nf;
    let p_e = a1 * b1 + (1.0 - a1) * (1.0 - b1);
    let kappa = if (1.0 - p_e).abs() < 1e-15 { None } else { Some((p_o - p_e) / (1.0 - p_e)) };
    Ok(Agreement { n, matches, percent_agreement: p_o, kappa, table })
}
