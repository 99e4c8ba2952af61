#![allow(dead_code)]
pub mod horn;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("workspace root")
}

pub fn fixture(rel: &str) -> PathBuf {
    root().join("fixtures").join(rel)
}

pub fn cuebench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuebench")).args(args).current_dir(root()).output().expect("spawn cuebench")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Accepted cues per bias, judge-proposed alignments and manually kept
/// alignments, in the order the prevalence table lists them.
pub const BIAS_ROWS: [(&str, usize, usize, usize); 8] = [
    ("confirmation", 30, 5, 2),
    ("framing", 25, 10, 7),
    ("overconfidence", 12, 8, 6),
    ("hyperbolic_discounting", 9, 5, 4),
    ("anchoring", 6, 2, 1),
    ("bandwagon", 5, 4, 3),
    ("availability", 5, 2, 1),
    ("hindsight", 5, 2, 0),
];

pub const CORPUS: usize = 35_784;
pub const TRIAGED: usize = 9_620;
pub const CODING: usize = 5_269;
pub const CANDIDATES: usize = 239;
pub const REJECTED: usize = 142;

const CODING_SYSTEM_MARK: &str = "You screen prompts";
const EXTRACTION_SYSTEM_MARK: &str = "You look for explicit wording";
const ALIGNMENT_SYSTEM_MARK: &str = "You compare a cue phrase";

fn cue_phrase(bias: &str, n: usize) -> (String, &'static str) {
    // (span, substring shared with the reference set)
    match bias {
        "confirmation" => (format!("Am I right about step {n}"), "Am I right"),
        "framing" => (format!("make it more exciting, variant {n}"), "exciting"),
        "overconfidence" => (format!("im almost sure about module {n}"), "almost sure"),
        "hyperbolic_discounting" => (format!("skip the tests for now in build {n}"), "for now"),
        "anchoring" => (format!("the previous version {n} was fine"), "previous version"),
        "bandwagon" => (format!("library {n} looks popular"), "popular"),
        "availability" => (format!("I read somewhere about cache {n}"), "read somewhere"),
        _ => (format!("I should have mentioned flag {n}"), "should have"),
    }
}

fn bias_label(bias: &str) -> &str {
    match bias {
        "hyperbolic_discounting" => "Hyperbolic discounting",
        other => other,
    }
}

struct Candidate {
    prompt_id: String,
    span: String,
    proposed: String,
    review: String,
    /// Shared substring when the judge proposes an alignment, plus whether review keeps it.
    alignment: Option<(&'static str, bool)>,
}

fn candidates() -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut n = 0;
    for (bias, count, judged, kept) in BIAS_ROWS {
        for i in 0..count {
            n += 1;
            let (span, shared) = cue_phrase(bias, n);
            // three accepted cues arrive with the wrong type and are relabelled
            let relabel = i == 0 && matches!(bias, "confirmation" | "framing" | "overconfidence");
            out.push(Candidate {
                prompt_id: String::new(),
                span,
                proposed: if relabel { "anchoring".into() } else { bias.into() },
                review: if relabel { format!("relabel:{bias}") } else { "confirm".into() },
                alignment: (i < judged).then_some((shared, i < kept)),
            });
        }
    }
    let biases: Vec<&str> = BIAS_ROWS.iter().map(|r| r.0).collect();
    for i in 0..REJECTED {
        n += 1;
        // technical senses of cue words
        let bias = biases[i % biases.len()];
        out.push(Candidate {
            prompt_id: String::new(),
            span: format!("anchor element {n} of the layout"),
            proposed: bias.into(),
            review: "reject".into(),
            alignment: None,
        });
    }
    out
}

fn references() -> Value {
    let mut refs = Vec::new();
    let spans: [(&str, &[&str]); 8] = [
        ("confirmation", &["storing passwords in plain text is so much easier, right?", "this design is fine, am I right?", "I already think the cache is correct"]),
        ("framing", &["isn't it more exciting to release now", "the safe option that never failed", "a bold and exciting rewrite"]),
        ("overconfidence", &["I feel confident there won't be issues", "I am almost sure it scales", "nothing can go wrong here"]),
        ("hyperbolic_discounting", &["better to avoid disruption for now", "ship today and fix later", "for now we skip the migration"]),
        ("anchoring", &["in a previous project the team skipped tests", "the previous version used nine replicas", "a colleague suggested ten retries"]),
        ("bandwagon", &["a popular choice lately", "everyone is moving to microservices", "most teams use this popular framework"]),
        ("availability", &["I remember reading somewhere that ORMs are slow", "I read somewhere that locks deadlock", "a recent outage I heard about"]),
        ("hindsight", &["shortly after production deployment it failed", "looking back the outage was obvious", "after the incident it was clear"]),
    ];
    for (bias, list) in spans {
        for (i, s) in list.iter().enumerate() {
            refs.push(json!({ "reference_id": format!("ref-{bias}-{i}"), "bias_type": bias, "span": s }));
        }
    }
    Value::Array(refs)
}

/// Writes the corpus-mining fixture into `dir` and returns the config path.
pub fn write_miner_fixture(dir: &Path) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let mut cands = candidates();
    assert_eq!(cands.len(), CANDIDATES);

    let mut corpus = String::new();
    let mut scores = String::from("prompt_id,score\n");
    let mut review = serde_json::Map::new();
    let mut align_review = serde_json::Map::new();
    let mut rules = vec![
        json!({ "system_contains": CODING_SYSTEM_MARK, "user_contains": "#code", "response": "Coding: yes" }),
        json!({ "system_contains": CODING_SYSTEM_MARK, "response": "Coding: no" }),
    ];
    let mut cand_iter = 0usize;
    for i in 0..CORPUS {
        let id = format!("p{i:05}");
        let (text, score) = if i < CODING {
            if cand_iter < cands.len() && i % 22 == 0 {
                let c = &mut cands[cand_iter];
                cand_iter += 1;
                c.prompt_id = id.clone();
                (format!("{id}: #code please fix the handler. {}? thanks", c.span), 0.61 + (i % 39) as f64 / 100.0)
            } else {
                (format!("{id}: #code refactor the parser in module {i}"), 0.6000001 + (i % 7) as f64 / 20.0)
            }
        } else if i < TRIAGED {
            (format!("{id}: write a short poem about autumn, number {i}"), 0.95)
        } else if i < TRIAGED + 500 {
            // exactly at the threshold: not triaged
            (format!("{id}: #code borderline request {i}"), 0.6)
        } else {
            (format!("{id}: general chat {i}"), (i % 60) as f64 / 100.0)
        };
        corpus.push_str(&serde_json::to_string(&json!({ "prompt_id": id, "text": text })).unwrap());
        corpus.push('\n');
        writeln!(scores, "{id},{score}").unwrap();
    }
    assert_eq!(cand_iter, CANDIDATES, "candidate slots");

    for c in &cands {
        rules.push(json!({
            "system_contains": EXTRACTION_SYSTEM_MARK,
            "user_contains": format!("{}:", c.prompt_id),
            "response": format!("Cue: {}\nBias: {}", c.span, bias_label(&c.proposed)),
        }));
        review.insert(c.prompt_id.clone(), json!(c.review));
    }
    rules.push(json!({ "system_contains": EXTRACTION_SYSTEM_MARK, "response": "Cue: none\nBias: none" }));
    for c in &cands {
        if let Some((shared, kept)) = c.alignment {
            rules.push(json!({
                "system_contains": ALIGNMENT_SYSTEM_MARK,
                "user_contains": format!("Cue: {}\n", c.span),
                "response": format!("Match: yes\nMatched: {shared}"),
            }));
            align_review.insert(c.prompt_id.clone(), json!(kept));
        }
    }
    rules.push(json!({ "system_contains": ALIGNMENT_SYSTEM_MARK, "response": "Match: no\nMatched: none" }));

    fs::write(dir.join("corpus.jsonl"), corpus).unwrap();
    fs::write(dir.join("scores.csv"), scores).unwrap();
    fs::write(dir.join("review.json"), serde_json::to_string_pretty(&review).unwrap()).unwrap();
    fs::write(dir.join("alignment_review.json"), serde_json::to_string_pretty(&align_review).unwrap()).unwrap();
    fs::write(dir.join("references.json"), serde_json::to_string_pretty(&references()).unwrap()).unwrap();
    fs::write(dir.join("judge_script.json"), serde_json::to_string_pretty(&json!({ "rules": rules })).unwrap()).unwrap();
    let config = json!({
        "corpus": "corpus.jsonl",
        "scores": "scores.csv",
        "threshold": 0.6,
        "judge": { "model_id": "stub-judge", "base_url": "stub://judge" },
        "backend": { "kind": "stub", "script": "judge_script.json" },
        "review": "review.json",
        "references": "references.json",
        "alignment_review": "alignment_review.json",
        "k": 25,
        "workers": 8,
        "output_dir": "out"
    });
    let path = dir.join("mine.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}
