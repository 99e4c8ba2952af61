use serde::{Deserialize, Serialize};

use super::{domain, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    /// Adjusted values in input order.
    pub q: Vec<f64>,
    /// Rejections in input order.
    pub rejected: Vec<bool>,
}

/// Benjamini-Hochberg adjusted values: q_(i) = min_{j >= i} m p_(j) / j, clipped to 1.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return domain(format!("p-value {bad} outside [0, 1]"));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank0, &idx) in order.iter().enumerate().rev() {
        let candidate = p_values[idx] * m as f64 / (rank0 + 1) as f64;
        running = running.min(candidate);
        q[idx] = running.min(1.0);
    }
    Ok(q)
}

/// Step-up procedure at level `alpha`.
pub fn bh_fdr(p_values: &[f64], alpha: f64) -> Result<BhResult, StatsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("alpha {alpha} outside [0, 1]"));
    }
    let q = bh_adjust(p_values)?;
    let m = p_values.len();
    let mut sorted: Vec<f64> = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutoff = (1..=m).rev().find(|&i| sorted[i - 1] <= i as f64 / m as f64 * alpha).map(|i| sorted[i - 1]);
    let rejected = match cutoff {
        Some(c) => p_values.iter().map(|&p| p <= c).collect(),
        None => vec![false; m],
    };
    Ok(BhResult { q, rejected })
}
