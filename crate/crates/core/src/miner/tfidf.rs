use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const TFIDF_VARIANT: &str = "lowercased \\w+ unigrams; raw term frequency; idf = ln((1+N)/(1+df)) + 1; L2-normalised; cosine";

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+").expect("static regex"))
}

pub fn tokenize(text: &str) -> Vec<String> {
    word_re().find_iter(text).map(|m| m.as_str().to_lowercase()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub index: usize,
    pub score: f64,
}

/// TF-IDF vectors over a fixed document collection.
#[derive(Debug, Clone)]
pub struct TfIdfIndex {
    vocab: HashMap<String, usize>,
    df: Vec<u64>,
    n_docs: usize,
    /// Sparse, L2-normalised document vectors sorted by term id.
    docs: Vec<Vec<(usize, f64)>>,
}

impl TfIdfIndex {
    pub fn new<S: AsRef<str>>(docs: &[S]) -> Self {
        let mut vocab: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<u64> = Vec::new();
        let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d.as_ref())).collect();
        for toks in &tokenized {
            let mut seen: Vec<usize> = toks
                .iter()
                .map(|t| {
                    let next = vocab.len();
                    let id = *vocab.entry(t.clone()).or_insert(next);
                    if id == df.len() {
                        df.push(0);
                    }
                    id
                })
                .collect();
            seen.sort_unstable();
            seen.dedup();
            for id in seen {
                df[id] += 1;
            }
        }
        let mut index = TfIdfIndex { vocab, df, n_docs: docs.len(), docs: Vec::new() };
        index.docs = tokenized.iter().map(|toks| index.vectorize(toks).0).collect();
        index
    }

    pub fn idf_for_df(&self, df: u64) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    /// Normalised in-vocabulary weights and the norm contribution of out-of-vocabulary terms.
    fn vectorize(&self, tokens: &[String]) -> (Vec<(usize, f64)>, f64) {
        let mut tf: HashMap<&str, u64> = HashMap::new();
        for t in tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        let mut known = Vec::new();
        let mut oov_sq = 0.0;
        for (term, count) in tf {
            match self.vocab.get(term) {
                Some(&id) => known.push((id, count as f64 * self.idf_for_df(self.df[id]))),
                None => oov_sq += (count as f64 * self.idf_for_df(0)).powi(2),
            }
        }
        known.sort_by_key(|(id, _)| *id);
        let norm = (known.iter().map(|(_, w)| w * w).sum::<f64>() + oov_sq).sqrt();
        if norm > 0.0 {
            for (_, w) in &mut known {
                *w /= norm;
            }
        }
        (known, norm)
    }

    pub fn len(&self) -> usize {
        self.n_docs
    }

    pub fn is_empty(&self) -> bool {
        self.n_docs == 0
    }

    /// Cosine similarity of `query` to every document in `candidates`.
    pub fn scores(&self, query: &str, candidates: impl IntoIterator<Item = usize>) -> Vec<ScoredDoc> {
        let (q, _) = self.vectorize(&tokenize(query));
        candidates
            .into_iter()
            .map(|index| {
                let d = &self.docs[index];
                let (mut i, mut j, mut dot) = (0, 0, 0.0);
                while i < q.len() && j < d.len() {
                    match q[i].0.cmp(&d[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            dot += q[i].1 * d[j].1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                ScoredDoc { index, score: dot }
            })
            .collect()
    }
}
