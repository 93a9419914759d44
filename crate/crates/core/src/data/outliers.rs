use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fence {
    pub q1: f64,
    pub q3: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub quantile_rule: String,
    pub factor: f64,
    pub fences: BTreeMap<String, Fence>,
    /// Rows outside the fence of each feature (a row may count for several).
    pub removed_per_feature: BTreeMap<String, usize>,
    pub removed_rows: usize,
    pub kept_rows: Vec<usize>,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Drops every row with a value outside `[Q1 - f·IQR, Q3 + f·IQR]` in any column.
pub fn remove_outliers_iqr(ds: &Dataset, factor: f64) -> (Dataset, OutlierReport) {
    let mut fences = BTreeMap::new();
    let mut removed_per_feature = BTreeMap::new();
    let mut outlier = vec![false; ds.n_rows()];
    if ds.n_rows() > 0 {
        for (j, col) in ds.columns.iter().enumerate() {
            let mut sorted: Vec<f64> = ds.values.column(j).to_vec();
            sorted.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&sorted, 0.25);
            let q3 = quantile_sorted(&sorted, 0.75);
            let iqr = q3 - q1;
            let (low, high) = if factor.is_infinite() {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (q1 - factor * iqr, q3 + factor * iqr)
            };
            let mut count = 0;
            for (i, &v) in ds.values.column(j).iter().enumerate() {
                if v < low || v > high {
                    outlier[i] = true;
                    count += 1;
                }
            }
            removed_per_feature.insert(col.name.clone(), count);
            fences.insert(col.name.clone(), Fence { q1, q3, low, high });
        }
    }
    let kept: Vec<usize> = (0..ds.n_rows()).filter(|&i| !outlier[i]).collect();
    let report = OutlierReport {
        quantile_rule: "type-7 linear interpolation".into(),
        factor,
        fences,
        removed_per_feature,
        removed_rows: ds.n_rows() - kept.len(),
        kept_rows: kept.clone(),
    };
    (ds.select_rows(&kept), report)
}
