use std::sync::OnceLock;

use regex::Regex;

use crate::model::Decision;
use crate::strategy::after_last_marker;

pub const DECISION_MARKER: &str = "Decision:";

fn option_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\boption\s+([ab])\b").expect("static regex"))
}

/// Reads the decision after the last case-insensitive `Decision:` marker.
/// Only the first non-empty line after the marker is considered.
pub fn parse_decision(raw: &str) -> Decision {
    let Some(start) = after_last_marker(raw, DECISION_MARKER) else {
        return Decision::invalid("no decision marker");
    };
    let Some(line) = raw[start..].lines().map(str::trim).find(|l| !l.is_empty()) else {
        return Decision::invalid("empty decision");
    };
    let mut seen_a = false;
    let mut seen_b = false;
    for cap in option_re().captures_iter(line) {
        match cap[1].to_ascii_lowercase().as_str() {
            "a" => seen_a = true,
            _ => seen_b = true,
        }
    }
    match (seen_a, seen_b) {
        (true, false) => Decision::OptionA,
        (false, true) => Decision::OptionB,
        (true, true) => Decision::invalid("both options named"),
        (false, false) => Decision::invalid("no option after decision marker"),
    }
}
