use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{domain, StatsError};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub successes: u64,
    pub trials: u64,
    /// Raw proportion successes / trials.
    pub point: f64,
    /// Wilson-centred estimate; always inside [lower, upper].
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

pub fn wilson_ci(successes: u64, trials: u64, confidence: f64) -> Result<ProportionEstimate, StatsError> {
    if trials == 0 {
        return domain("wilson interval needs trials > 0");
    }
    if successes > trials {
        return domain(format!("successes {successes} exceed trials {trials}"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return domain(format!("confidence {confidence} outside (0, 1)"));
    }
    let z = if (confidence - 0.95).abs() < 1e-12 { Z_95 } else { normal_quantile(1.0 - (1.0 - confidence) / 2.0) };
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(ProportionEstimate {
        successes,
        trials,
        point: p,
        center,
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_interval() {
        let w = wilson_ci(24, 97, 0.95).unwrap();
        assert!((w.lower - 0.1723).abs() <= 0.0005, "{}", w.lower);
        assert!((w.upper - 0.3418).abs() <= 0.0005, "{}", w.upper);
    }

    #[test]
    fn zero_successes_clip_at_zero() {
        let w = wilson_ci(0, 10, 0.95).unwrap();
        assert_eq!(w.lower, 0.0);
        assert!(w.upper > 0.0);
    }

    #[test]
    fn half_is_symmetric() {
        let w = wilson_ci(50, 100, 0.95).unwrap();
        assert!((w.center - 0.5).abs() < 1e-15);
        assert!(((w.upper - 0.5) - (0.5 - w.lower)).abs() < 1e-12);
    }

    #[test]
    fn z_matches_quantile() {
        assert!((normal_quantile(0.975) - Z_95).abs() < 1e-9);
    }

    #[test]
    fn invalid_counts() {
        assert!(wilson_ci(1, 0, 0.95).is_err());
        assert!(wilson_ci(5, 4, 0.95).is_err());
        assert!(wilson_ci(1, 4, 1.5).is_err());
    }
}
