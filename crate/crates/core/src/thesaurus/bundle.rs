use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::envelope::{from_checked_json, to_checked_json};
use super::{Result, ThesaurusError};
use crate::clustering::ClusteringConfig;
use crate::data::{Dataset, NormalizationStats};
use crate::explain::{lime_explain, lime_fidelity, FeatureImportanceVector, FeatureStats, LimeConfig};
use crate::rng::derive_seed;
use crate::surrogate::{Evaluation, LinearSurrogate};
use crate::validity::{ClusterProfile, ValidityReport};

pub const THESAURUS_FORMAT: &str = "hcx-thesaurus";
pub const THESAURUS_VERSION: u32 = 1;

/// Identity of the dataset a thesaurus was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    /// SHA-256 over column names and kinds.
    pub schema_hash: String,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl DatasetFingerprint {
    pub fn of(ds: &Dataset) -> Self {
        let mut h = Sha256::new();
        for c in &ds.columns {
            h.update(c.name.as_bytes());
            h.update([0u8]);
            h.update(serde_json::to_string(&c.kind).expect("column kind serializes").as_bytes());
            h.update([0u8]);
        }
        Self {
            schema_hash: hex::encode(h.finalize()),
            n_rows: ds.n_rows(),
            n_cols: ds.n_cols(),
        }
    }
}

/// One stored demonstration: an instance, its cluster and its LIME explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub instance_id: String,
    /// `(feature, value)` in original units.
    pub features: Vec<(String, f64)>,
    pub cluster: i32,
    pub cluster_label: String,
    pub explanation: FeatureImportanceVector,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSummary {
    pub model: LinearSurrogate,
    pub scores: Evaluation,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub created: String,
    pub lime: LimeConfig,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thesaurus {
    pub format: String,
    pub version: u32,
    pub fingerprint: DatasetFingerprint,
    pub variant: String,
    pub clustering: ClusteringConfig,
    pub validity: ValidityReport,
    /// Display label per cluster id.
    pub cluster_labels: Vec<String>,
    pub profile: ClusterProfile,
    pub surrogate: SurrogateSummary,
    pub normalization: NormalizationStats,
    pub preamble: String,
    /// Feature name → plain-language description.
    pub glossary: BTreeMap<String, String>,
    pub exemplars: Vec<Exemplar>,
    pub provenance: Provenance,
}

impl Thesaurus {
    pub fn feature_names(&self) -> Vec<String> {
        self.normalization.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn label_of(&self, cluster: i32) -> String {
        usize::try_from(cluster)
            .ok()
            .and_then(|c| self.cluster_labels.get(c).cloned())
            .unwrap_or_else(|| format!("cluster-{cluster}"))
    }

    pub fn verify(&self, ds: &Dataset) -> Result<()> {
        let found = DatasetFingerprint::of(ds);
        if found != self.fingerprint {
            return Err(ThesaurusError::FingerprintMismatch {
                expected: self.fingerprint.schema_hash.clone(),
                found: found.schema_hash,
            });
        }
        Ok(())
    }

    pub fn exemplar(&self, id: &str) -> Option<&Exemplar> {
        self.exemplars.iter().find(|e| e.instance_id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        to_checked_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        from_checked_json(text, THESAURUS_FORMAT, THESAURUS_VERSION)
    }
}

pub fn save_thesaurus(t: &Thesaurus, path: &Path) -> Result<()> {
    std::fs::write(path, t.to_json()?).map_err(|e| ThesaurusError::Io(format!("{}: {e}", path.display())))
}

pub fn load_thesaurus(path: &Path) -> Result<Thesaurus> {
    let bytes = std::fs::read(path).map_err(|e| ThesaurusError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes).map_err(|_| ThesaurusError::CorruptFile("not UTF-8".into()))?;
    Thesaurus::from_json(&text)
}

/// Everything needed to assemble a thesaurus for the winning clustering.
pub struct ThesaurusInputs<'a> {
    /// Normalized training data the model was fitted on.
    pub dataset: &'a Dataset,
    pub normalization: &'a NormalizationStats,
    pub variant: &'a str,
    pub clustering: &'a ClusteringConfig,
    pub labels: &'a [i32],
    pub validity: &'a ValidityReport,
    pub profile: &'a ClusterProfile,
    pub surrogate: &'a LinearSurrogate,
    pub surrogate_scores: &'a Evaluation,
    pub exemplar_ids: &'a [String],
    pub lime: &'a LimeConfig,
    pub preamble: &'a str,
    pub glossary: &'a BTreeMap<String, String>,
    pub seed: u64,
    pub created: &'a str,
    pub notes: Vec<String>,
}

/// Explains every exemplar with LIME on the surrogate. Exemplars whose
/// explanation fails are skipped with a warning; an empty bank is an error.
pub fn build_thesaurus(inp: ThesaurusInputs<'_>) -> Result<Thesaurus> {
    let ds = inp.dataset;
    if inp.exemplar_ids.is_empty() {
        return Err(ThesaurusError::EmptyExemplarBank);
    }
    if inp.labels.len() != ds.n_rows() {
        return Err(ThesaurusError::InvalidInput(format!(
            "{} labels for {} rows",
            inp.labels.len(),
            ds.n_rows()
        )));
    }
    let names = ds.feature_names();
    let stats = inp
        .normalization
        .subset(&names)
        .ok_or_else(|| ThesaurusError::InvalidInput("normalization stats do not cover the dataset columns".into()))?;
    let feature_stats = FeatureStats::from_data(&names, ds.values.view());
    let labels_text = inp.profile.labels.clone();

    let built: Vec<Option<Exemplar>> = inp
        .exemplar_ids
        .par_iter()
        .map(|id| -> Result<Option<Exemplar>> {
            let row = ds
                .row_index(id)
                .ok_or_else(|| ThesaurusError::InvalidInput(format!("exemplar {id} is not a dataset row")))?;
            let x = ds.values.row(row);
            let cluster = inp.labels[row];
            let cfg = LimeConfig {
                seed: derive_seed(inp.seed, &format!("lime/{id}")),
                ..inp.lime.clone()
            };
            let outcome = match lime_explain(inp.surrogate, x, cluster, &feature_stats, &cfg) {
                Ok(o) => o,
                Err(e) => {
                    log::warn!("skipping exemplar {id}: {e}");
                    return Ok(None);
                }
            };
            let fidelity = lime_fidelity(&outcome.local_model, inp.surrogate, outcome.perturbations.view(), &outcome.weights)
                .unwrap_or(0.0);
            let mut explanation = outcome.importance.with_instance(id.clone());
            explanation.metadata.insert("fidelity".into(), fidelity);
            let original = stats.denormalize_row(&x.to_vec());
            Ok(Some(Exemplar {
                instance_id: id.clone(),
                features: names.iter().cloned().zip(original).collect(),
                cluster,
                cluster_label: usize::try_from(cluster)
                    .ok()
                    .and_then(|c| labels_text.get(c).cloned())
                    .unwrap_or_else(|| format!("cluster-{cluster}")),
                explanation,
                fidelity,
            }))
        })
        .collect::<Result<_>>()?;
    let exemplars: Vec<Exemplar> = built.into_iter().flatten().collect();
    let mut model = inp.surrogate.clone();
    model.training.loss_trace.clear();
    if exemplars.is_empty() {
        return Err(ThesaurusError::EmptyExemplarBank);
    }
    Ok(Thesaurus {
        format: THESAURUS_FORMAT.into(),
        version: THESAURUS_VERSION,
        fingerprint: DatasetFingerprint::of(ds),
        variant: inp.variant.to_string(),
        clustering: inp.clustering.clone(),
        validity: inp.validity.clone(),
        cluster_labels: labels_text,
        profile: inp.profile.clone(),
        surrogate: SurrogateSummary {
            model,
            scores: inp.surrogate_scores.clone(),
            note: "multinomial logistic regression surrogate trained on cluster labels".into(),
        },
        normalization: stats,
        preamble: inp.preamble.to_string(),
        glossary: inp.glossary.clone(),
        exemplars,
        provenance: Provenance {
            seed: inp.seed,
            created: inp.created.to_string(),
            lime: inp.lime.clone(),
            notes: inp.notes,
        },
    })
}

/// Mean LIME fidelity over the bank.
pub fn mean_fidelity(t: &Thesaurus) -> f64 {
    t.exemplars.iter().map(|e| e.fidelity).sum::<f64>() / t.exemplars.len().max(1) as f64
}

/// Feature matrix of the exemplars in normalized units.
pub fn exemplar_matrix(t: &Thesaurus) -> ndarray::Array2<f64> {
    let d = t.normalization.columns.len();
    let mut m = ndarray::Array2::zeros((t.exemplars.len(), d));
    for (i, e) in t.exemplars.iter().enumerate() {
        let raw: Vec<f64> = e.features.iter().map(|f| f.1).collect();
        for (j, v) in t.normalization.normalize_row(&raw).into_iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    m
}
