use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{render_ranking, LlmError, Result, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsePath {
    StructuredBlock,
    FallbackScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedExplanation {
    pub technical_ranking: Vec<(String, Sign)>,
    pub narrative: String,
    pub raw_response: String,
    pub parse_path: ParsePath,
}

impl ParsedExplanation {
    pub fn features(&self) -> Vec<&str> {
        self.technical_ranking.iter().map(|(f, _)| f.as_str()).collect()
    }
}

static RANK_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\d+\s*[.)]\s*`?([A-Za-z0-9_]+)`?\s*:\s*([+\-−–])\s*$").unwrap());
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9_]+|[+\-−]").unwrap());

const POSITIVE: &[&str] = &[
    "increase", "increases", "increased", "increasing", "higher", "more", "positive", "positively", "raises",
    "raise", "boosts", "+",
];
const NEGATIVE: &[&str] = &[
    "decrease", "decreases", "decreased", "decreasing", "lower", "less", "fewer", "negative", "negatively",
    "reduces", "reduce", "-", "−",
];

fn header(line: &str, name: &str) -> bool {
    line.trim().trim_start_matches(['#', '*', ' ']).trim_end_matches(['*', ' ']).eq_ignore_ascii_case(name)
}

fn structured(text: &str, features: &[String]) -> Option<(Vec<(String, Sign)>, String)> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| header(l, "RANKING:"))?;
    let mut ranking: Vec<(String, Sign)> = Vec::new();
    let mut end = start + 1;
    while end < lines.len() {
        let line = lines[end];
        if header(line, "EXPLANATION:") {
            break;
        }
        if let Some(c) = RANK_LINE.captures(line) {
            let name = &c[1];
            let sign = if &c[2] == "+" { Sign::Plus } else { Sign::Minus };
            if features.iter().any(|f| f == name) && !ranking.iter().any(|(f, _)| f == name) {
                ranking.push((name.to_string(), sign));
            }
        } else if !line.trim().is_empty() {
            break;
        }
        end += 1;
    }
    if ranking.is_empty() {
        return None;
    }
    let explanation = lines.iter().position(|l| header(l, "EXPLANATION:"));
    let narrative = match explanation {
        Some(i) => lines[i + 1..].join("\n").trim().to_string(),
        None => String::new(),
    };
    let narrative = if narrative.is_empty() {
        let mut rest: Vec<&str> = lines[..start].to_vec();
        rest.extend(&lines[end..]);
        rest.join("\n").trim().to_string()
    } else {
        narrative
    };
    Some((ranking, narrative))
}

fn polarity(word: &str) -> Option<Sign> {
    let w = word.to_ascii_lowercase();
    if POSITIVE.contains(&w.as_str()) {
        Some(Sign::Plus)
    } else if NEGATIVE.contains(&w.as_str()) {
        Some(Sign::Minus)
    } else {
        None
    }
}

/// Features in order of first mention, each signed by the nearest polarity
/// word within its sentence.
fn fallback(text: &str, features: &[String]) -> Vec<(String, Sign)> {
    let mut found: Vec<(usize, String, Sign)> = Vec::new();
    let mut offset = 0;
    for sentence in text.split_inclusive(['.', '!', '?', ';', '\n']) {
        let tokens: Vec<(usize, &str)> = WORD.find_iter(sentence).map(|m| (m.start(), m.as_str())).collect();
        let lower: Vec<String> = tokens.iter().map(|t| t.1.to_ascii_lowercase()).collect();
        for f in features {
            if found.iter().any(|(_, g, _)| g == f) {
                continue;
            }
            let parts: Vec<String> = f.to_ascii_lowercase().split('_').map(str::to_string).collect();
            let exact = lower.iter().position(|t| *t == f.to_ascii_lowercase());
            let spaced = (0..lower.len()).find(|&i| lower.len() - i >= parts.len() && lower[i..i + parts.len()] == parts[..]);
            let Some((at, len)) = exact.map(|i| (i, 1)).or(spaced.map(|i| (i, parts.len()))) else {
                continue;
            };
            let sign = (0..tokens.len())
                .filter(|&i| i < at || i >= at + len)
                .filter_map(|i| polarity(tokens[i].1).map(|s| (i.abs_diff(at), i, s)))
                .min_by_key(|&(d, i, _)| (d, i))
                .map_or(Sign::Plus, |t| t.2);
            found.push((offset + tokens[at].0, f.clone(), sign));
        }
        offset += sentence.len();
    }
    found.sort_by_key(|t| t.0);
    found.into_iter().map(|(_, f, s)| (f, s)).collect()
}

/// Extracts the ranking block when present, otherwise scans the free text for
/// feature names.
pub fn parse_response(text: &str, features: &[String]) -> Result<ParsedExplanation> {
    if text.trim().is_empty() {
        return Err(LlmError::EmptyText);
    }
    let (ranking, narrative, path) = match structured(text, features) {
        Some((r, n)) => (r, n, ParsePath::StructuredBlock),
        None => {
            let r = fallback(text, features);
            if r.is_empty() {
                return Err(LlmError::Unparseable);
            }
            let n = text.trim().to_string();
            (r, n, ParsePath::FallbackScan)
        }
    };
    let narrative = if narrative.is_empty() {
        render_ranking(&ranking).trim().to_string()
    } else {
        narrative
    };
    Ok(ParsedExplanation {
        technical_ranking: ranking,
        narrative,
        raw_response: text.to_string(),
        parse_path: path,
    })
}
