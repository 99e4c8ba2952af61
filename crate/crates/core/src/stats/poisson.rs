//! Two-group Poisson rate comparison: a log-link GLM with a log-exposure offset
//! fitted by IRLS, and the conditional binomial test for small totals.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use super::{domain, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HcVariant {
    #[default]
    Hc0,
    Hc1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions { tolerance: 1e-10, max_iterations: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonFit {
    pub beta0: f64,
    /// Log rate ratio of group 1 over group 0.
    pub beta1: f64,
    pub se_model: f64,
    pub se_hc0: f64,
    pub se_hc1: f64,
    /// Pearson dispersion sum(r^2) / (n - 2); 1.0 when n <= 2.
    pub dispersion: f64,
    pub deviance: f64,
    pub iterations: usize,
}

impl PoissonFit {
    pub fn se_hc(&self, variant: HcVariant) -> f64 {
        match variant {
            HcVariant::Hc0 => self.se_hc0,
            HcVariant::Hc1 => self.se_hc1,
        }
    }

    /// Quasi-Poisson standard error: model-based se inflated by sqrt(dispersion).
    pub fn se_quasi(&self) -> f64 {
        self.se_model * self.dispersion.sqrt()
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([(b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det])
}

fn inverse2(a: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

fn deviance(y: &[f64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&y, &m)| if y > 0.0 { y * (y / m).ln() - (y - m) } else { m })
        .sum::<f64>()
}

/// Fits log E[k_i] = b0 + b1 g_i + offset_i by iteratively reweighted least squares.
pub fn poisson_rate_glm(counts: &[u64], offsets_log_tokens: &[f64], group: &[bool], opts: GlmOptions) -> Result<PoissonFit, StatsError> {
    let n = counts.len();
    if offsets_log_tokens.len() != n || group.len() != n {
        return domain("counts, offsets and group indicators must have equal length");
    }
    if offsets_log_tokens.iter().any(|o| !o.is_finite()) {
        return domain("offsets must be finite log token counts (token counts > 0)");
    }
    let n1 = group.iter().filter(|g| **g).count();
    if n1 == 0 || n1 == n {
        return domain("each group needs at least one document");
    }
    let k1: u64 = counts.iter().zip(group).filter(|(_, g)| **g).map(|(k, _)| k).sum();
    let k0: u64 = counts.iter().zip(group).filter(|(_, g)| !**g).map(|(k, _)| k).sum();
    if k1 == 0 || k0 == 0 {
        return Err(StatsError::Fit(format!("degenerate data: group event totals {k1} and {k0}; use the exact test")));
    }

    let y: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    let x: Vec<f64> = group.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
    let mut mu: Vec<f64> = y.iter().map(|&v| v + 0.1).collect();
    let mut eta: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
    let mut beta = [0.0f64; 2];
    let mut dev_old = deviance(&y, &mu);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iterations {
        iterations = iter;
        let mut xtwx = [[0.0; 2]; 2];
        let mut xtwz = [0.0; 2];
        for i in 0..n {
            let w = mu[i];
            let z = eta[i] - offsets_log_tokens[i] + (y[i] - mu[i]) / mu[i];
            let xi = [1.0, x[i]];
            for r in 0..2 {
                xtwz[r] += w * xi[r] * z;
                for c in 0..2 {
                    xtwx[r][c] += w * xi[r] * xi[c];
                }
            }
        }
        beta = solve2(xtwx, xtwz).ok_or_else(|| StatsError::Fit("singular weighted design".into()))?;
        for i in 0..n {
            eta[i] = beta[0] + beta[1] * x[i] + offsets_log_tokens[i];
            mu[i] = eta[i].exp();
        }
        if mu.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(StatsError::Fit("fitted means left the valid range".into()));
        }
        let dev = deviance(&y, &mu);
        if (dev - dev_old).abs() / (dev.abs() + 0.1) < opts.tolerance {
            converged = true;
            dev_old = dev;
            break;
        }
        dev_old = dev;
    }
    if !converged {
        return Err(StatsError::Fit(format!("IRLS did not converge in {} iterations", opts.max_iterations)));
    }

    let mut fisher = [[0.0; 2]; 2];
    let mut meat = [[0.0; 2]; 2];
    let mut pearson = 0.0;
    for i in 0..n {
        let xi = [1.0, x[i]];
        let resid = y[i] - mu[i];
        pearson += resid * resid / mu[i];
        for r in 0..2 {
            for c in 0..2 {
                fisher[r][c] += mu[i] * xi[r] * xi[c];
                meat[r][c] += resid * resid * xi[r] * xi[c];
            }
        }
    }
    let bread = inverse2(fisher).ok_or_else(|| StatsError::Fit("singular information matrix".into()))?;
    // (bread * meat * bread)[1][1]
    let mut bm = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            bm[r][c] = bread[r][0] * meat[0][c] + bread[r][1] * meat[1][c];
        }
    }
    let hc0_var = bm[1][0] * bread[0][1] + bm[1][1] * bread[1][1];
    let nf = n as f64;
    let dispersion = if n > 2 { pearson / (nf - 2.0) } else { 1.0 };
    let hc1_var = if n > 2 { hc0_var * nf / (nf - 2.0) } else { hc0_var };

    Ok(PoissonFit {
        beta0: beta[0],
        beta1: beta[1],
        se_model: bread[1][1].sqrt(),
        se_hc0: hc0_var.max(0.0).sqrt(),
        se_hc1: hc1_var.max(0.0).sqrt(),
        dispersion,
        deviance: dev_old,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TwoSidedMethod {
    /// Sum of outcome probabilities no larger than the observed one.
    #[default]
    MinLikelihood,
    /// Twice the smaller tail.
    Doubling,
}

/// Conditional test of equal Poisson rates: given N = k1 + k0,
/// k1 ~ Binomial(N, T1 / (T1 + T0)) under the null.
pub fn exact_rate_ratio_test(k1: u64, t1: f64, k0: u64, t0: f64, method: TwoSidedMethod) -> Result<f64, StatsError> {
    if k1 + k0 == 0 {
        return domain("exact rate test needs k1 + k0 > 0");
    }
    if !(t1 > 0.0 && t0 > 0.0 && t1.is_finite() && t0.is_finite()) {
        return domain(format!("exposures must be positive, got {t1} and {t0}"));
    }
    let total = k1 + k0;
    let pi = t1 / (t1 + t0);
    let (ln_pi, ln_q) = (pi.ln(), (1.0 - pi).ln());
    let pmf: Vec<f64> = (0..=total)
        .map(|k| (ln_binomial(total, k) + k as f64 * ln_pi + (total - k) as f64 * ln_q).exp())
        .collect();
    let observed = pmf[k1 as usize];
    let p = match method {
        TwoSidedMethod::MinLikelihood => {
            let bound = observed * (1.0 + 1e-7);
            pmf.iter().filter(|&&x| x <= bound).sum::<f64>()
        }
        TwoSidedMethod::Doubling => {
            let lower: f64 = pmf[..=k1 as usize].iter().sum();
            let upper: f64 = pmf[k1 as usize..].iter().sum();
            2.0 * lower.min(upper)
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_to_one_rate_ratio() {
        // (k1=30, T1=1000) vs (k0=10, T0=1000), split over several documents.
        let counts = [12, 8, 10, 4, 3, 3];
        let tokens: [f64; 6] = [400.0, 300.0, 300.0, 500.0, 250.0, 250.0];
        let group = [true, true, true, false, false, false];
        let offs: Vec<f64> = tokens.iter().map(|t| t.ln()).collect();
        let fit = poisson_rate_glm(&counts, &offs, &group, GlmOptions::default()).unwrap();
        assert!((fit.beta1 - 3f64.ln()).abs() < 1e-8, "{}", fit.beta1);
    }

    #[test]
    fn equal_rates_zero_ratio() {
        let counts = [5, 5, 10, 10];
        let offs: Vec<f64> = [100.0f64, 100.0, 200.0, 200.0].iter().map(|t| t.ln()).collect();
        let fit = poisson_rate_glm(&counts, &offs, &[true, false, true, false], GlmOptions::default()).unwrap();
        assert!(fit.beta1.abs() < 1e-8);
    }

    #[test]
    fn offset_doubling_invariance() {
        let counts = [7, 2, 9, 4, 1];
        let t = [120.0f64, 80.0, 150.0, 90.0, 60.0];
        let g = [true, true, false, false, false];
        let a = poisson_rate_glm(&counts, &t.map(f64::ln), &g, GlmOptions::default()).unwrap();
        let b = poisson_rate_glm(&counts, &t.map(|x| (2.0 * x).ln()), &g, GlmOptions::default()).unwrap();
        assert!((a.beta1 - b.beta1).abs() < 1e-8);
    }

    #[test]
    fn degenerate_groups() {
        let offs = [1.0f64.ln(); 2];
        assert!(matches!(poisson_rate_glm(&[0, 0], &offs, &[true, false], GlmOptions::default()), Err(StatsError::Fit(_))));
        assert!(poisson_rate_glm(&[1, 2], &offs, &[true, true], GlmOptions::default()).is_err());
    }

    #[test]
    fn exact_examples() {
        assert!(exact_rate_ratio_test(0, 1.0, 0, 1.0, TwoSidedMethod::MinLikelihood).is_err());
        let p = exact_rate_ratio_test(5, 100.0, 0, 100.0, TwoSidedMethod::MinLikelihood).unwrap();
        assert!((p - 0.0625).abs() < 1e-12);
        let p = exact_rate_ratio_test(3, 100.0, 3, 100.0, TwoSidedMethod::MinLikelihood).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let p = exact_rate_ratio_test(5, 100.0, 0, 100.0, TwoSidedMethod::Doubling).unwrap();
        assert!((p - 0.0625).abs() < 1e-12);
        assert!(exact_rate_ratio_test(1, 0.0, 1, 1.0, TwoSidedMethod::MinLikelihood).is_err());
    }
}
