use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{domain, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Neumaier-compensated sum, so constant samples average to themselves exactly.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Linear-interpolation quantile (type 7) of an ascending-sorted slice.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check(resamples: usize, confidence: f64) -> Result<(), StatsError> {
    if resamples == 0 {
        return domain("bootstrap needs at least one resample");
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return domain(format!("confidence {confidence} outside (0, 1)"));
    }
    Ok(())
}

fn finish(mut stats: Vec<f64>, estimate: f64, confidence: f64, resamples: usize, seed: u64) -> Interval {
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Interval {
        estimate,
        lower: percentile_linear(&stats, tail),
        upper: percentile_linear(&stats, 1.0 - tail),
        confidence,
        resamples,
        seed,
    }
}

/// Percentile bootstrap of an arbitrary statistic. Deterministic given `seed`.
pub fn bootstrap_ci<F>(values: &[f64], statistic: F, resamples: usize, seed: u64, confidence: f64) -> Result<Interval, StatsError>
where
    F: Fn(&[f64]) -> f64,
{
    if values.is_empty() {
        return domain("bootstrap of an empty sample");
    }
    check(resamples, confidence)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut buf = vec![0.0; n];
    let stats = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = values[rng.random_range(0..n)];
            }
            statistic(&buf)
        })
        .collect();
    Ok(finish(stats, statistic(values), confidence, resamples, seed))
}

pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, seed: u64, confidence: f64) -> Result<Interval, StatsError> {
    bootstrap_ci(values, mean, resamples, seed, confidence)
}

/// Paired bootstrap of mean(a) - mean(b); items are resampled jointly.
pub fn bootstrap_paired_diff_ci(a: &[f64], b: &[f64], resamples: usize, seed: u64, confidence: f64) -> Result<Interval, StatsError> {
    if a.is_empty() || a.len() != b.len() {
        return domain(format!("paired bootstrap needs equal non-empty samples, got {} and {}", a.len(), b.len()));
    }
    check(resamples, confidence)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = a.len();
    let stats = (0..resamples)
        .map(|_| {
            let diff = compensated_sum((0..n).map(|_| {
                let i = rng.random_range(0..n);
                a[i] - b[i]
            }));
            diff / n as f64
        })
        .collect();
    Ok(finish(stats, mean(a) - mean(b), confidence, resamples, seed))
}
