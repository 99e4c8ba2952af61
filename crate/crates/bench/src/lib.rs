//! Shared inputs for the criterion benches.

use cuebench_core::horn::{parse_program, parse_query, Program, Term};

/// Small deterministic generator so inputs are identical across runs.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed ^ 0x9e37_79b9_7f4a_7c15)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
        self.0 >> 11
    }

    pub fn unit(&mut self) -> f64 {
        self.next_u64() as f64 / (1u64 << 53) as f64
    }
}

/// Chain of `depth` rules ending in a threshold comparison.
pub fn chain_program(depth: usize) -> (Program, Term) {
    let mut text = String::from("base(option_a, 7).\nbase(option_b, 3).\n");
    text.push_str("l0(X) :- base(X, N), N > 5.\n");
    for i in 1..depth {
        text.push_str(&format!("l{i}(X) :- l{}(X).\n", i - 1));
    }
    text.push_str(&format!("decision(X) :- l{}(X).\n", depth - 1));
    (parse_program(&text).expect("generated program parses"), parse_query("decision(X)").expect("query parses"))
}

/// Fan-out program where most branches fail late, exercising backtracking.
pub fn fanout_program(width: usize) -> (Program, Term) {
    let mut text = String::new();
    for i in 0..width {
        text.push_str(&format!("cand(c{i}).\nscore(c{i}, {}).\n", i % 10));
    }
    text.push_str("decision(X) :- cand(X), score(X, N), N >= 9.\n");
    (parse_program(&text).expect("generated program parses"), parse_query("decision(X)").expect("query parses"))
}

pub fn ratings(rng: &mut Lcg, n: usize) -> Vec<f64> {
    (0..n).map(|_| (rng.next_u64() % 6) as f64 / 5.0).collect()
}

pub fn distinct(rng: &mut Lcg, n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 + rng.unit() * 0.5).collect()
}

/// Counts, log-token offsets and group labels for a two-group rate model.
pub fn rate_fixture(rng: &mut Lcg, docs: usize) -> (Vec<u64>, Vec<f64>, Vec<bool>) {
    let tokens: Vec<f64> = (0..docs).map(|_| 200.0 + (rng.next_u64() % 1300) as f64).collect();
    let group: Vec<bool> = (0..docs).map(|i| i % 2 == 0).collect();
    let counts = tokens.iter().zip(&group).map(|(t, g)| ((t * if *g { 0.03 } else { 0.02 }) * (0.5 + rng.unit())) as u64).collect();
    (counts, tokens.iter().map(|t| t.ln()).collect(), group)
}

const WORDS: [&str; 16] = [
    "rollback", "deploy", "cache", "latency", "review", "always", "team", "evidence", "budget", "option", "risk", "metric",
    "schema", "index", "canary", "release",
];

pub fn sentences(rng: &mut Lcg, n: usize, len: usize) -> Vec<String> {
    (0..n).map(|_| (0..len).map(|_| WORDS[(rng.next_u64() % 16) as usize]).collect::<Vec<_>>().join(" ")).collect()
}
