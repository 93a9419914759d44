//! Structure and content quality of generated explanations.

mod content;
mod structure;

pub use content::{euclidean_distance, ndcg_difference, rank_vector, spearman_rank, NdcgDifference};
pub use structure::{
    ari_readability, coherence, grammar_error_count, sentiment_consistency, BuiltinRules, GrammarChecker, Lexicon,
    LEXICON,
};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::FeatureImportanceVector;
use crate::llm::{ranking_of, ParsedExplanation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("text is empty")]
    EmptyText,
    #[error("text has no words")]
    NoWords,
    #[error("need at least 2 features shared with the ground truth, found {0}")]
    TooFewCommonFeatures(usize),
    #[error("ground-truth weights are all zero")]
    ZeroGainVector,
    #[error("vectors have {0} and {1} entries")]
    DimensionMismatch(usize, usize),
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, QualityError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub coherence: f64,
    pub grammar_errors: usize,
    pub readability_ari: f64,
    pub sentiment_consistency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentMetrics {
    pub spearman: f64,
    pub ndcg_difference: f64,
    pub euclidean: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub instance_id: String,
    pub model: String,
    pub technique: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub provenance: Provenance,
    pub structure: StructureMetrics,
    pub content: ContentMetrics,
}

/// Scores one response. Structure metrics read the narrative section against
/// the prompt; content metrics compare the parsed ranking with `ground`, both
/// sides vectorized as signed reciprocal ranks for the Euclidean distance.
pub fn evaluate_quality(
    prompt: &str,
    parsed: &ParsedExplanation,
    ground: &FeatureImportanceVector,
    provenance: Provenance,
) -> Result<QualityReport> {
    let text = &parsed.narrative;
    let structure = StructureMetrics {
        coherence: coherence(prompt, text)?,
        grammar_errors: grammar_error_count(text),
        readability_ari: ari_readability(text)?,
        sentiment_consistency: sentiment_consistency(prompt, text)?,
    };
    let order: Vec<String> = parsed.technical_ranking.iter().map(|(f, _)| f.clone()).collect();
    let features: Vec<String> = ground.weights.iter().map(|(n, _)| n.clone()).collect();
    let content = ContentMetrics {
        spearman: spearman_rank(ground, &order)?,
        ndcg_difference: ndcg_difference(ground, &order)?.value,
        euclidean: euclidean_distance(
            &rank_vector(&features, &ranking_of(ground)),
            &rank_vector(&features, &parsed.technical_ranking),
        )?,
    };
    Ok(QualityReport {
        provenance,
        structure,
        content,
    })
}

const METRIC_COLUMNS: [&str; 7] = [
    "coherence",
    "grammar_errors",
    "readability",
    "sentiment_consistency",
    "spearman",
    "ndcg_difference",
    "euclidean",
];

impl QualityReport {
    pub fn metrics(&self) -> [f64; 7] {
        let s = &self.structure;
        let c = &self.content;
        [
            s.coherence,
            s.grammar_errors as f64,
            s.readability_ari,
            s.sentiment_consistency,
            c.spearman,
            c.ndcg_difference,
            c.euclidean,
        ]
    }
}

/// Mean metrics of one (model, technique) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub model: String,
    pub technique: String,
    pub n: usize,
    pub means: [f64; 7],
}

impl QualitySummary {
    pub fn spearman(&self) -> f64 {
        self.means[4]
    }

    pub fn ndcg_difference(&self) -> f64 {
        self.means[5]
    }

    pub fn euclidean(&self) -> f64 {
        self.means[6]
    }
}

/// Averages reports per (model, technique), sorted by model then technique.
pub fn summarize(reports: &[QualityReport]) -> Vec<QualitySummary> {
    let mut groups: BTreeMap<(String, String), Vec<&QualityReport>> = BTreeMap::new();
    for r in reports {
        groups
            .entry((r.provenance.model.clone(), r.provenance.technique.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((model, technique), rs)| {
            let mut means = [0.0; 7];
            for r in &rs {
                for (m, v) in means.iter_mut().zip(r.metrics()) {
                    *m += v;
                }
            }
            for m in &mut means {
                *m /= rs.len() as f64;
            }
            QualitySummary {
                model,
                technique,
                n: rs.len(),
                means,
            }
        })
        .collect()
}

fn csv_err(e: impl std::fmt::Display) -> QualityError {
    QualityError::Csv(e.to_string())
}

/// One row per report: provenance columns then the seven metrics.
pub fn write_reports_csv<W: Write>(reports: &[QualityReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["model", "technique", "instance_id"];
    header.extend(METRIC_COLUMNS);
    out.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let p = &r.provenance;
        let mut row = vec![p.model.clone(), p.technique.clone(), p.instance_id.clone()];
        row.extend(r.metrics().iter().map(|v| v.to_string()));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

/// One row per (model, technique) with mean metrics.
pub fn write_summary_csv<W: Write>(summary: &[QualitySummary], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["model", "technique", "n"];
    header.extend(METRIC_COLUMNS);
    out.write_record(&header).map_err(csv_err)?;
    for s in summary {
        let mut row = vec![s.model.clone(), s.technique.clone(), s.n.to_string()];
        row.extend(s.means.iter().map(|v| v.to_string()));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}
