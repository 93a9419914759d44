use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use regex::Regex;

use super::{QualityError, Result};

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[a-z0-9]+").unwrap());

fn tokens(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    TOKEN.find_iter(&lower).map(|m| m.as_str().to_string()).collect()
}

fn term_counts(text: &str) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for t in tokens(text) {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

/// TF-IDF cosine similarity of the two texts: sublinear term frequency
/// `1 + ln tf` and smoothed inverse document frequency `ln(3 / (1 + df)) + 1`
/// over the pair.
pub fn coherence(prompt: &str, response: &str) -> Result<f64> {
    let a = term_counts(prompt);
    let b = term_counts(response);
    if a.is_empty() || b.is_empty() {
        return Err(QualityError::EmptyText);
    }
    let idf = |t: &str| {
        let df = usize::from(a.contains_key(t)) + usize::from(b.contains_key(t));
        (3.0 / (1.0 + df as f64)).ln() + 1.0
    };
    let weigh = |m: &BTreeMap<String, usize>| -> BTreeMap<String, f64> {
        m.iter().map(|(t, &c)| (t.clone(), (1.0 + (c as f64).ln()) * idf(t))).collect()
    };
    let (va, vb) = (weigh(&a), weigh(&b));
    let dot: f64 = va.iter().filter_map(|(t, x)| vb.get(t).map(|y| x * y)).sum();
    let norm = |v: &BTreeMap<String, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    Ok((dot / (norm(&va) * norm(&vb))).clamp(0.0, 1.0))
}

/// A pluggable grammar checker.
pub trait GrammarChecker {
    fn count_errors(&self, text: &str) -> usize;
}

/// Counts doubled words, sentences starting in lowercase, unmatched brackets
/// or quotes, and whitespace before punctuation.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinRules;

static SPACE_BEFORE_PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[ \t]+[.,;:!?]").unwrap());
static WORDS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z']+").unwrap());

impl BuiltinRules {
    pub fn doubled_words(text: &str) -> usize {
        let words: Vec<String> = text
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
            .collect();
        words.windows(2).filter(|w| !w[0].is_empty() && w[0] == w[1]).count()
    }

    pub fn lowercase_sentence_starts(text: &str) -> usize {
        text.split(['.', '!', '?'])
            .filter_map(|s| s.chars().find(|c| c.is_alphanumeric()))
            .filter(|c| c.is_lowercase())
            .count()
    }

    pub fn unmatched_delimiters(text: &str) -> usize {
        let mut stack = Vec::new();
        let mut errors = 0;
        for c in text.chars() {
            match c {
                '(' | '[' | '{' => stack.push(c),
                ')' | ']' | '}' => {
                    let open = match c {
                        ')' => '(',
                        ']' => '[',
                        _ => '{',
                    };
                    if stack.last() == Some(&open) {
                        stack.pop();
                    } else {
                        errors += 1;
                    }
                }
                _ => {}
            }
        }
        errors + stack.len() + text.matches('"').count() % 2
    }

    pub fn space_before_punctuation(text: &str) -> usize {
        SPACE_BEFORE_PUNCT.find_iter(text).count()
    }
}

impl GrammarChecker for BuiltinRules {
    fn count_errors(&self, text: &str) -> usize {
        Self::doubled_words(text)
            + Self::lowercase_sentence_starts(text)
            + Self::unmatched_delimiters(text)
            + Self::space_before_punctuation(text)
    }
}

pub fn grammar_error_count(text: &str) -> usize {
    BuiltinRules.count_errors(text)
}

/// Automated Readability Index `4.71·chars/words + 0.5·words/sentences − 21.43`
/// with alphanumeric characters only and sentences split on runs of `.!?`.
pub fn ari_readability(text: &str) -> Result<f64> {
    let words = text.split_whitespace().filter(|w| w.chars().any(char::is_alphanumeric)).count();
    if words == 0 {
        return Err(QualityError::NoWords);
    }
    let chars = text.chars().filter(|c| c.is_alphanumeric()).count();
    let sentences = text
        .split(['.', '!', '?'])
        .filter(|s| s.chars().any(char::is_alphanumeric))
        .count();
    Ok(4.71 * chars as f64 / words as f64 + 0.5 * words as f64 / sentences as f64 - 21.43)
}

/// Word polarities in [-1, 1].
pub struct Lexicon {
    pub version: String,
    words: HashMap<String, f64>,
}

pub static LEXICON: LazyLock<Lexicon> =
    LazyLock::new(|| Lexicon::parse(include_str!("../../data/polarity_lexicon_v1.tsv"), "v1"));

impl Lexicon {
    pub fn parse(tsv: &str, version: &str) -> Self {
        let words = tsv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| {
                let (w, p) = l.split_once('\t')?;
                Some((w.trim().to_lowercase(), p.trim().parse::<f64>().ok()?.clamp(-1.0, 1.0)))
            })
            .collect();
        Self {
            version: version.to_string(),
            words,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.words.get(word).copied()
    }

    /// Mean polarity of the words found in the lexicon, 0 when none are.
    pub fn polarity(&self, text: &str) -> f64 {
        let lower = text.to_lowercase();
        let hits: Vec<f64> = WORDS.find_iter(&lower).filter_map(|m| self.get(m.as_str())).collect();
        if hits.is_empty() {
            0.0
        } else {
            hits.iter().sum::<f64>() / hits.len() as f64
        }
    }
}

/// `|polarity(prompt) − polarity(response)|`, from 0 (same tone) to 2.
pub fn sentiment_consistency(prompt: &str, response: &str) -> Result<f64> {
    if prompt.trim().is_empty() || response.trim().is_empty() {
        return Err(QualityError::EmptyText);
    }
    Ok((LEXICON.polarity(prompt) - LEXICON.polarity(response)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherence_extremes() {
        let t = "Steps and sleep define the active group.";
        assert!((coherence(t, t).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(coherence("steps sleep", "mood heart").unwrap(), 0.0);
        assert!(matches!(coherence("", "x"), Err(QualityError::EmptyText)));
    }

    #[test]
    fn coherence_matches_hand_tfidf() {
        let got = coherence("steps sleep heart", "steps sleep mood").unwrap();
        let shared = 1.0_f64;
        let single = (1.5_f64).ln() + 1.0;
        let expected = 2.0 * shared * shared / (2.0 * shared * shared + single * single);
        assert!((got - expected).abs() < 1e-12);
        assert!(got > 0.0 && got < 1.0);
    }

    #[test]
    fn grammar_rules() {
        assert_eq!(grammar_error_count("The cat sat."), 0);
        assert_eq!(grammar_error_count("the the cat sat ."), 3);
        assert_eq!(grammar_error_count("He said (hello."), 1);
        assert_eq!(grammar_error_count("She said \"hi."), 1);
        assert_eq!(grammar_error_count("It works. it fails] too."), 2);
    }

    #[test]
    fn ari_formula() {
        assert!((ari_readability("The cat sat.").unwrap() - (-5.80)).abs() < 1e-9);
        let once = ari_readability("Sleep quality improved markedly.").unwrap();
        let twice = ari_readability("Sleep quality improved markedly. Sleep quality improved markedly.").unwrap();
        assert!((once - twice).abs() < 1e-9);
        assert!(matches!(ari_readability(""), Err(QualityError::NoWords)));
        assert!(matches!(ari_readability("... !"), Err(QualityError::NoWords)));
    }

    #[test]
    fn sentiment() {
        assert!(LEXICON.len() > 100);
        let t = "A healthy and happy week.";
        assert_eq!(sentiment_consistency(t, t).unwrap(), 0.0);
        assert_eq!(sentiment_consistency("excellent superb", "terrible awful").unwrap(), 2.0);
        assert_eq!(sentiment_consistency("steps and minutes", "heart rate").unwrap(), 0.0);
        assert_eq!(
            sentiment_consistency("good week", "poor sleep").unwrap(),
            sentiment_consistency("poor sleep", "good week").unwrap()
        );
    }
}
