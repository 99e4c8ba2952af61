//! Oracle checks behind `cuebench stats selftest`. Each oracle is computed
//! independently of the procedure it checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{agreement, bh_adjust, bootstrap_mean_ci, mann_whitney, poisson_rate_glm, wilson_ci, GlmOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> SelfCheck {
    SelfCheck { name: name.into(), passed, detail }
}

/// Two-sided exact p by listing every way to pick the first sample's ranks.
pub fn brute_force_mw_p(a: &[f64], b: &[f64]) -> f64 {
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let observed: usize = pooled.iter().enumerate().filter(|(_, (_, in_a))| *in_a).map(|(i, _)| i + 1).sum();
    let (m, n) = (a.len(), a.len() + b.len());
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        total += 1;
        le += (rank_sum <= observed) as u64;
        ge += (rank_sum >= observed) as u64;
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

fn mw_enumeration(rng: &mut ChaCha8Rng) -> SelfCheck {
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let total = rng.random_range(2..=10);
        let na = rng.random_range(1..total);
        let mut values: Vec<f64> = (0..total).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
        values.shuffle(rng);
        let (a, b) = values.split_at(na);
        let got = match mann_whitney(a, b) {
            Ok(r) => r.p_two_sided,
            Err(e) => return check("mann_whitney_exact", false, e.to_string()),
        };
        worst = worst.max((got - brute_force_mw_p(a, b)).abs());
    }
    let fixed = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).map(|r| r.p_two_sided).unwrap_or(f64::NAN);
    check(
        "mann_whitney_exact",
        worst <= 1e-12 && fixed == 0.1,
        format!("500 samples, max |p - enumeration| = {worst:.2e}; [1,2,3] vs [4,5,6] p = {fixed}"),
    )
}

/// q_i = min over j with p_j >= p_i of m p_j / rank_j, written without sorting tricks.
fn bh_by_definition(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let rank = |j: usize| (0..m).filter(|&k| p[k] < p[j] || (p[k] == p[j] && k <= j)).count();
    (0..m)
        .map(|i| (0..m).filter(|&j| rank(j) >= rank(i)).map(|j| p[j] * m as f64 / rank(j) as f64).fold(1.0, f64::min))
        .collect()
}

fn bh(rng: &mut ChaCha8Rng) -> SelfCheck {
    let fixed = [0.01, 0.04, 0.03, 0.005];
    let expected = [0.02, 0.04, 0.04, 0.02];
    let q = bh_adjust(&fixed).unwrap_or_default();
    let fixed_ok = q.len() == 4 && q.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12);
    let mut monotone = true;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(1..=20);
        let p: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let q = bh_adjust(&p).unwrap_or_default();
        for i in 0..m {
            for j in 0..m {
                if p[i] < p[j] && q[i] > q[j] {
                    monotone = false;
                }
            }
            monotone &= q[i] >= p[i] - 1e-15 && q[i] <= 1.0;
        }
        for (a, b) in q.iter().zip(bh_by_definition(&p)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(
        "bh_fdr",
        fixed_ok && monotone && worst < 1e-12,
        format!("fixed vector q = {q:?}; 1000 random vectors monotone = {monotone}, max |q - definition| = {worst:.2e}"),
    )
}

fn wilson() -> SelfCheck {
    match wilson_ci(24, 97, 0.95) {
        Ok(ci) => check(
            "wilson_ci",
            (ci.lower - 0.1723).abs() <= 0.0005 && (ci.upper - 0.3418).abs() <= 0.0005,
            format!("24/97 -> [{:.4}, {:.4}]", ci.lower, ci.upper),
        ),
        Err(e) => check("wilson_ci", false, e.to_string()),
    }
}

fn glm(rng: &mut ChaCha8Rng) -> SelfCheck {
    let mut worst = 0.0f64;
    let mut worst_offset = 0.0f64;
    for _ in 0..200 {
        let n1 = rng.random_range(1..=6);
        let n0 = rng.random_range(1..=6);
        let counts: Vec<u64> = (0..n1 + n0).map(|_| rng.random_range(5..60)).collect();
        let tokens: Vec<f64> = (0..n1 + n0).map(|_| rng.random_range(100..2000) as f64).collect();
        let group: Vec<bool> = (0..n1 + n0).map(|i| i < n1).collect();
        let sum = |g: bool, v: &dyn Fn(usize) -> f64| (0..counts.len()).filter(|&i| group[i] == g).map(v).sum::<f64>();
        let (k1, t1) = (sum(true, &|i| counts[i] as f64), sum(true, &|i| tokens[i]));
        let (k0, t0) = (sum(false, &|i| counts[i] as f64), sum(false, &|i| tokens[i]));
        let closed = ((k1 / t1) / (k0 / t0)).ln();
        let offsets: Vec<f64> = tokens.iter().map(|t| t.ln()).collect();
        let doubled: Vec<f64> = tokens.iter().map(|t| (2.0 * t).ln()).collect();
        match (poisson_rate_glm(&counts, &offsets, &group, GlmOptions::default()), poisson_rate_glm(&counts, &doubled, &group, GlmOptions::default())) {
            (Ok(f), Ok(g)) => {
                worst = worst.max((f.beta1 - closed).abs());
                worst_offset = worst_offset.max((f.beta1 - g.beta1).abs());
            }
            (Err(e), _) | (_, Err(e)) => return check("poisson_glm", false, e.to_string()),
        }
    }
    check(
        "poisson_glm",
        worst <= 1e-6 && worst_offset <= 1e-8,
        format!("200 fixtures, max |beta1 - closed form| = {worst:.2e}, offset doubling drift = {worst_offset:.2e}"),
    )
}

fn kappa_expanded(t: [[f64; 2]; 2]) -> f64 {
    let n = t[0][0] + t[0][1] + t[1][0] + t[1][1];
    let po = (t[0][0] + t[1][1]) / n;
    let pe = ((t[0][0] + t[0][1]) * (t[0][0] + t[1][0]) + (t[1][0] + t[1][1]) * (t[0][1] + t[1][1])) / (n * n);
    (po - pe) / (1.0 - pe)
}

fn agreement_checks(rng: &mut ChaCha8Rng) -> SelfCheck {
    let a: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
    let b: Vec<bool> = a.iter().enumerate().map(|(i, &x)| if i < 7 { !x } else { x }).collect();
    let pct = agreement(&a, &b).map(|r| r.percent_agreement).unwrap_or(f64::NAN);
    let mut worst = 0.0f64;
    let mut evaluated = 0;
    while evaluated < 100 {
        let cells: [usize; 4] = std::array::from_fn(|_| rng.random_range(0..15));
        let (mut la, mut lb) = (Vec::new(), Vec::new());
        for (idx, &c) in cells.iter().enumerate() {
            for _ in 0..c {
                la.push(idx / 2 == 1);
                lb.push(idx % 2 == 1);
            }
        }
        let t = [[cells[0] as f64, cells[1] as f64], [cells[2] as f64, cells[3] as f64]];
        let Ok(r) = agreement(&la, &lb) else { continue };
        let Some(k) = r.kappa else { continue };
        worst = worst.max((k - kappa_expanded(t)).abs());
        evaluated += 1;
    }
    check(
        "agreement_kappa",
        (pct - 0.825).abs() < 1e-12 && worst <= 1e-10,
        format!("33/40 -> {:.1}%; 100 tables, max |kappa - expanded| = {worst:.2e}", pct * 100.0),
    )
}

fn bootstrap_repeat() -> SelfCheck {
    let values: Vec<f64> = (0..40).map(|i| (i < 16) as u8 as f64).collect();
    let first = bootstrap_mean_ci(&values, 10_000, 20240601, 0.95);
    let second = bootstrap_mean_ci(&values, 10_000, 20240601, 0.95);
    match (first, second) {
        (Ok(x), Ok(y)) => check(
            "bootstrap_determinism",
            x == y,
            format!("seed 20240601 -> [{:.6}, {:.6}] twice", x.lower, x.upper),
        ),
        (Err(e), _) | (_, Err(e)) => check("bootstrap_determinism", false, e.to_string()),
    }
}

/// Runs every oracle with a fixed generator seed.
pub fn selftest() -> Vec<SelfCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);
    vec![mw_enumeration(&mut rng), bh(&mut rng), wilson(), glm(&mut rng), agreement_checks(&mut rng), bootstrap_repeat()]
}
