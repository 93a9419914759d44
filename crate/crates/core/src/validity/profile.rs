use serde::{Deserialize, Serialize};

use super::{mann_whitney_u, Result, ValidityError};
use crate::data::{quantile_sorted, Dataset};
use crate::linalg::fsum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub feature: String,
    /// Per-cluster mean, indexed by cluster id.
    pub means: Vec<f64>,
    pub medians: Vec<f64>,
    /// Cluster tested against the rest; `None` for the two-cluster case where
    /// cluster 0 is tested against cluster 1.
    pub contrast: Option<usize>,
    pub u: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub alpha: f64,
    pub labels: Vec<String>,
    pub cluster_sizes: Vec<usize>,
    pub features: Vec<FeatureProfile>,
}

impl ClusterProfile {
    pub fn feature(&self, name: &str) -> Option<&FeatureProfile> {
        self.features.iter().find(|f| f.feature == name)
    }

    pub fn significant_features(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| f.significant)
            .map(|f| f.feature.as_str())
            .collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Mann-Whitney comparison of every validation feature across clusters. With
/// two clusters the test is cluster 0 vs cluster 1; with more, each cluster is
/// tested against the rest and the smallest p is kept. Noise rows are ignored.
pub fn characterize_clusters(
    validation: &Dataset,
    labels: &[i32],
    alpha: f64,
    display_labels: Option<&[String]>,
) -> Result<ClusterProfile> {
    if validation.n_rows() != labels.len() {
        return Err(ValidityError::RowMismatch {
            rows: validation.n_rows(),
            labels: labels.len(),
        });
    }
    let k = labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0);
    if k < 2 {
        return Err(ValidityError::TooFewClusters(k));
    }
    let mut sizes = vec![0usize; k];
    for &l in labels.iter().filter(|&&l| l >= 0) {
        sizes[l as usize] += 1;
    }
    let names: Vec<String> = match display_labels {
        Some(given) if given.len() == k => given.to_vec(),
        _ => (0..k).map(|c| format!("cluster-{c}")).collect(),
    };

    let mut features = Vec::with_capacity(validation.n_cols());
    for (j, col) in validation.columns.iter().enumerate() {
        let mut groups: Vec<Vec<f64>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= 0 {
                groups[l as usize].push(validation.values[[i, j]]);
            }
        }
        let means = groups
            .iter()
            .map(|g| if g.is_empty() { f64::NAN } else { fsum(g.iter().copied()) / g.len() as f64 })
            .collect();
        let medians = groups.iter().map(|g| median(g.clone())).collect();
        let (contrast, test) = if k == 2 {
            (None, mann_whitney_u(&groups[0], &groups[1])?)
        } else {
            let mut best = None;
            for c in 0..k {
                let rest: Vec<f64> = (0..k).filter(|&o| o != c).flat_map(|o| groups[o].iter().copied()).collect();
                let t = mann_whitney_u(&groups[c], &rest)?;
                if best.as_ref().is_none_or(|(_, b): &(usize, super::MannWhitney)| t.p_two_sided < b.p_two_sided) {
                    best = Some((c, t));
                }
            }
            let (c, t) = best.expect("k >= 2");
            (Some(c), t)
        };
        features.push(FeatureProfile {
            feature: col.name.clone(),
            means,
            medians,
            contrast,
            u: test.u,
            p_value: test.p_two_sided,
            significant: test.p_two_sided < alpha,
        });
    }
    Ok(ClusterProfile {
        alpha,
        labels: names,
        cluster_sizes: sizes,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn dataset(cols: usize, rows: usize, f: impl Fn(usize, usize) -> f64) -> Dataset {
        let names: Vec<String> = (0..cols).map(|j| format!("v{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Dataset::from_matrix(Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j)), &refs)
    }

    #[test]
    fn identical_feature_not_significant() {
        let ds = dataset(1, 8, |i, _| (i % 4) as f64);
        let p = characterize_clusters(&ds, &[0, 0, 0, 0, 1, 1, 1, 1], 0.05, None).unwrap();
        assert_eq!(p.features[0].p_value, 1.0);
        assert!(!p.features[0].significant);
        assert_eq!(p.labels, vec!["cluster-0", "cluster-1"]);
    }

    #[test]
    fn small_samples_stay_insignificant() {
        let ds = dataset(1, 4, |i, _| [1.0, 2.0, 9.0, 10.0][i]);
        let p = characterize_clusters(&ds, &[0, 0, 1, 1], 0.05, None).unwrap();
        assert!((p.features[0].p_value - 1.0 / 3.0).abs() < 1e-12);
        assert!(!p.features[0].significant);
        assert_eq!(p.features[0].means, vec![1.5, 9.5]);
    }

    #[test]
    fn one_row_per_feature() {
        let ds = dataset(41, 30, |i, j| ((i * 7 + j * 3) % 11) as f64 + if i < 15 { 0.0 } else { j as f64 });
        let labels: Vec<i32> = (0..30).map(|i| i32::from(i >= 15)).collect();
        let p = characterize_clusters(&ds, &labels, 0.05, Some(&["low".into(), "high".into()])).unwrap();
        assert_eq!(p.features.len(), 41);
        assert_eq!(p.labels, vec!["low", "high"]);
        for f in &p.features {
            assert_eq!(f.significant, f.p_value < 0.05);
        }
    }

    #[test]
    fn row_mismatch() {
        let ds = dataset(1, 3, |_, _| 0.0);
        assert!(matches!(
            characterize_clusters(&ds, &[0, 1], 0.05, None),
            Err(ValidityError::RowMismatch { .. })
        ));
    }
}
