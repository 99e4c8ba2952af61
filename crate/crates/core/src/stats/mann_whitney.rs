use serde::{Deserialize, Serialize};

use super::{domain, normal_two_sided_p, StatsError};

/// Largest combined sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: #{a > b} + 0.5 #{a = b}.
    pub u: f64,
    pub p_two_sided: f64,
    pub method: MwMethod,
}

fn check(sample: &[f64], name: &str) -> Result<(), StatsError> {
    if sample.is_empty() {
        return domain(format!("{name} is empty"));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return domain(format!("{name} contains NaN"));
    }
    Ok(())
}

/// Average ranks (1-based) of `values`, plus the tie-group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

fn u_statistic(a: &[f64], b: &[f64]) -> (f64, Vec<usize>) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let na = a.len() as f64;
    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    (rank_sum_a - na * (na + 1.0) / 2.0, ties)
}

/// Frequencies of U = 0..=m*n under the null, by the recurrence
/// f(m, n, u) = f(m-1, n, u-n) + f(m, n-1, u).
fn exact_u_frequencies(m: usize, n: usize) -> Vec<f64> {
    // table[j][u] holds f(i, j, u) for the current i.
    let max_u = m * n;
    let mut table: Vec<Vec<f64>> = (0..=n).map(|_| {
        let mut row = vec![0.0; max_u + 1];
        row[0] = 1.0;
        row
    }).collect();
    for _i in 1..=m {
        let mut next: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n + 1];
        next[0][0] = 1.0;
        for j in 1..=n {
            for u in 0..=max_u {
                let from_m = if u >= j { table[j][u - j] } else { 0.0 };
                next[j][u] = from_m + next[j - 1][u];
            }
        }
        table = next;
    }
    table.swap_remove(n)
}

/// Two-sided Mann-Whitney U test with midrank ties.
///
/// Exact p when `a.len() + b.len() <= 12` and there are no ties; otherwise a
/// normal approximation with tie-corrected variance and continuity correction.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check(a, "sample_a")?;
    check(b, "sample_b")?;
    let (u, ties) = u_statistic(a, b);
    let (m, n) = (a.len(), b.len());

    if m + n <= EXACT_MAX_N && ties.is_empty() {
        let freq = exact_u_frequencies(m, n);
        let total: f64 = freq.iter().sum();
        let u_idx = u.round() as usize;
        let lower: f64 = freq[..=u_idx].iter().sum::<f64>() / total;
        let upper: f64 = freq[u_idx..].iter().sum::<f64>() / total;
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(MannWhitney { u, p_two_sided: p, method: MwMethod::Exact });
    }

    let (mf, nf) = (m as f64, n as f64);
    let total = mf + nf;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let diff = ((u - mf * nf / 2.0).abs() - 0.5).max(0.0);
        normal_two_sided_p(diff / var.sqrt())
    };
    Ok(MannWhitney { u, p_two_sided: p, method: MwMethod::Normal })
}

/// Rank-biserial correlation of the baseline sample against a strategy sample.
/// Positive when strategy values tend to be lower than baseline values.
pub fn rank_biserial(sample_null: &[f64], sample_strategy: &[f64]) -> Result<f64, StatsError> {
    check(sample_null, "baseline sample")?;
    check(sample_strategy, "strategy sample")?;
    let (u, _) = u_statistic(sample_null, sample_strategy);
    let nn = (sample_null.len() * sample_strategy.len()) as f64;
    Ok((2.0 * u / nn - 1.0).clamp(-1.0, 1.0))
}
