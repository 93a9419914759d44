use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{Column, DataError, Dataset, FeatureCategory, Result};
use crate::clustering::jacobi_eigh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub input_columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Components as rows (m × d), ordered by decreasing explained variance.
    pub components: Array2<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let centered = x - &Array1::from(self.mean.clone());
        centered.dot(&self.components.t())
    }
}

/// Projects onto the fewest principal components whose cumulative explained
/// variance reaches `retained_variance`.
pub fn pca_reduce(ds: &Dataset, retained_variance: f64) -> Result<(Dataset, PcaModel)> {
    let n = ds.n_rows();
    if n < 2 || ds.n_cols() == 0 {
        return Err(DataError::InvalidSpec("PCA needs at least two rows and one column".into()));
    }
    let mean = ds.values.mean_axis(Axis(0)).expect("non-empty");
    let centered = &ds.values - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    let eig = jacobi_eigh(cov.view()).map_err(|e| DataError::InvalidSpec(e.to_string()))?;
    let d = ds.n_cols();
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    // Ascending from the solver; walk from the top.
    let order: Vec<usize> = (0..d).rev().collect();
    let mut ratios = Vec::new();
    let mut cum = 0.0;
    for &k in &order {
        let r = if total > 0.0 { eig.values[k].max(0.0) / total } else { 0.0 };
        ratios.push(r);
        cum += r;
        if cum >= retained_variance - 1e-12 {
            break;
        }
    }
    let m = ratios.len();
    let mut components = Array2::zeros((m, d));
    for (row, &k) in order.iter().take(m).enumerate() {
        components.row_mut(row).assign(&eig.vectors.column(k));
    }
    let model = PcaModel {
        input_columns: ds.feature_names(),
        mean: mean.to_vec(),
        components,
        explained_variance_ratio: ratios,
    };
    let projected = model.transform(&ds.values);
    let columns = (1..=m)
        .map(|i| Column::numeric(&format!("pc{i}"), FeatureCategory::Other))
        .collect();
    let mut out = Dataset::new(projected, columns, ds.entity_ids.clone(), ds.timestamps.clone());
    out.role = ds.role;
    out.granularity = ds.granularity;
    Ok((out, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn collinear_data_needs_one_component() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let (out, model) = pca_reduce(&Dataset::from_matrix(x, &["a", "b"]), 0.99).unwrap();
        assert_eq!(out.n_cols(), 1);
        assert!((model.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_variance_keeps_all_components() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -2.0]];
        let (out, _) = pca_reduce(&Dataset::from_matrix(x, &["a", "b"]), 1.0).unwrap();
        assert_eq!(out.n_cols(), 2);
    }
}
