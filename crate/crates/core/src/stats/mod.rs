//! Statistical procedures behind the comparison tables, the lexicon analysis
//! and the corpus prevalence report. All functions are pure; randomness only
//! enters through explicit seeds.

mod agreement;
mod bootstrap;
mod fdr;
mod mann_whitney;
mod poisson;
mod proportion;
mod selftest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{agreement, Agreement};
pub use bootstrap::{bootstrap_ci, bootstrap_mean_ci, bootstrap_paired_diff_ci, percentile_linear, Interval};
pub use fdr::{bh_adjust, bh_fdr, BhResult};
pub use mann_whitney::{mann_whitney, midranks, rank_biserial, MannWhitney, MwMethod, EXACT_MAX_N};
pub use poisson::{
    exact_rate_ratio_test, poisson_rate_glm, GlmOptions, HcVariant, PoissonFit, TwoSidedMethod,
};
pub use proportion::{normal_quantile, wilson_ci, ProportionEstimate, Z_95};
pub use selftest::{brute_force_mw_p, selftest, SelfCheck};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit error: {0}")]
    Fit(String),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T, StatsError> {
    Err(StatsError::Domain(msg.into()))
}

/// Two-sided standard normal tail probability.
pub fn normal_two_sided_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Significance stars for a (corrected) p-value.
pub fn stars(q: f64) -> &'static str {
    if q < 0.001 {
        "***"
    } else if q < 0.01 {
        "**"
    } else if q < 0.05 {
        "*"
    } else {
        ""
    }
}

/// A strategy-versus-baseline comparison after FDR correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub comparison_id: String,
    /// Mann-Whitney U of the baseline sample.
    pub statistic: f64,
    pub r_rb: f64,
    pub p: f64,
    pub q: f64,
    pub stars: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMethod {
    GlmHc,
    GlmQuasi,
    Exact,
}

/// Per (bias, feature) rate-ratio estimate. `se` and `dispersion` are `None` for exact tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEffect {
    pub bias_type: String,
    pub feature_id: String,
    /// Positive means higher per-token usage in the sensitive group.
    pub log_rate_ratio: f64,
    pub se: Option<f64>,
    pub dispersion: Option<f64>,
    pub method: EffectMethod,
    pub p: f64,
    pub q: f64,
    pub stars: String,
    pub sensitive_count: u64,
    pub sensitive_tokens: u64,
    pub other_count: u64,
    pub other_tokens: u64,
    /// True when a zero cell forced a 0.5 continuity correction of the point estimate.
    #[serde(default)]
    pub corrected_estimate: bool,
}
