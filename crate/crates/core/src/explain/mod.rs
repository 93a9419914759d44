//! Local and global explanations of a probabilistic classifier.

mod anchors;
mod counterfactual;
mod lime;

pub use anchors::{anchor_coverage, anchor_precision, anchors_explain, AnchorConfig, AnchorRule, Bins, Predicate, Relation};
pub use counterfactual::{cf_proximity, cf_sparsity, counterfactual_search, Counterfactual, CounterfactualConfig, Proximity};
pub use lime::{lime_explain, lime_fidelity, FeatureStats, LimeConfig, LimeOutcome, LocalModel};

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::surrogate::LinearSurrogate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("perturbations carry no signal: constant predictions and zero variance")]
    DegenerateNeighborhood,
    #[error("empty sample")]
    EmptySample,
    #[error("empty data")]
    EmptyData,
    #[error("unknown class {0}")]
    UnknownClass(i32),
    #[error("no counterfactual found after {0} escalations")]
    NoCounterfactualFound(usize),
    #[error("expected {expected} features, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("target class {0} is already the predicted class")]
    AlreadyTarget(i32),
}

pub type Result<T> = std::result::Result<T, ExplainError>;

/// A black box with class probabilities. Columns of `predict_proba` follow
/// `class_labels`.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;

    fn class_labels(&self) -> Vec<i32>;

    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64>;

    /// Gradient of the probability of class column `class` at `x`, when known.
    fn gradient(&self, _x: ArrayView1<f64>, _class: usize) -> Option<Vec<f64>> {
        None
    }

    fn class_column(&self, label: i32) -> Option<usize> {
        self.class_labels().iter().position(|&c| c == label)
    }

    /// Predicted class column of every row (first maximum wins).
    fn predict_columns(&self, x: ArrayView2<f64>) -> Vec<usize> {
        self.predict_proba(x).rows().into_iter().map(|r| argmax(r.iter().copied())).collect()
    }

    fn predict_label_row(&self, x: ArrayView1<f64>) -> i32 {
        let m = x.to_owned().insert_axis(ndarray::Axis(0));
        self.class_labels()[self.predict_columns(m.view())[0]]
    }
}

pub(crate) fn argmax<I: IntoIterator<Item = f64>>(values: I) -> usize {
    values
        .into_iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
        .0
}

impl Classifier for LinearSurrogate {
    fn n_features(&self) -> usize {
        LinearSurrogate::n_features(self)
    }

    fn class_labels(&self) -> Vec<i32> {
        self.classes.clone()
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        LinearSurrogate::predict_proba(self, x).expect("feature count checked by caller")
    }

    fn gradient(&self, x: ArrayView1<f64>, class: usize) -> Option<Vec<f64>> {
        let p = self.predict_proba_row(x).ok()?;
        let d = self.weights.ncols();
        Some(
            (0..d)
                .map(|j| {
                    let mix: f64 = (0..p.len()).map(|c| p[c] * self.weights[[c, j]]).sum();
                    p[class] * (self.weights[[class, j]] - mix)
                })
                .collect(),
        )
    }
}

/// Signed per-feature weights from one explanation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportanceVector {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    pub target_class: i32,
    /// `(feature, weight)` in input column order.
    pub weights: Vec<(String, f64)>,
    pub intercept: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, f64>,
}

impl FeatureImportanceVector {
    pub fn get(&self, feature: &str) -> Option<f64> {
        self.weights.iter().find(|(f, _)| f == feature).map(|w| w.1)
    }

    /// Features by descending `|weight|`; ties fall back to name order.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut out = self.weights.clone();
        out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn with_instance(mut self, id: impl Into<String>) -> Self {
        self.instance_id = Some(id.into());
        self
    }
}

/// The white-box explanation: the surrogate's weight row for `class`.
pub fn coefficients_explain(model: &LinearSurrogate, class: i32) -> Result<FeatureImportanceVector> {
    let c = model.class_index(class).ok_or(ExplainError::UnknownClass(class))?;
    Ok(FeatureImportanceVector {
        method: "coefficients".into(),
        instance_id: None,
        target_class: class,
        weights: model
            .feature_names
            .iter()
            .cloned()
            .zip(model.weights.row(c).iter().copied())
            .collect(),
        intercept: model.bias[c],
        metadata: BTreeMap::new(),
    })
}

/// Writes `instance_id,method,target_class,feature,weight` rows for charting.
pub fn write_importance_csv<W: Write>(w: W, vectors: &[FeatureImportanceVector]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["instance_id", "method", "target_class", "feature", "weight"])?;
    for v in vectors {
        let id = v.instance_id.clone().unwrap_or_default();
        for (f, wt) in &v.weights {
            out.write_record([id.as_str(), v.method.as_str(), &v.target_class.to_string(), f, &wt.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
