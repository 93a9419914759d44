use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset, Normalization};

/// Per-column affine map `z = (x - shift) / scale`; `scale == 0` marks a
/// constant column that normalizes to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub shift: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mode: Normalization,
    /// zscore uses the population standard deviation (divide by n).
    pub population_sd: bool,
    pub columns: Vec<ColumnStats>,
}

impl NormalizationStats {
    pub fn get(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Stats restricted to `names`, in that order.
    pub fn subset(&self, names: &[String]) -> Option<Self> {
        let columns = names.iter().map(|n| self.get(n).cloned()).collect::<Option<Vec<_>>>()?;
        Some(Self {
            mode: self.mode,
            population_sd: self.population_sd,
            columns,
        })
    }

    pub fn normalize_value(&self, j: usize, x: f64) -> f64 {
        let c = &self.columns[j];
        if c.scale == 0.0 {
            0.0
        } else {
            (x - c.shift) / c.scale
        }
    }

    pub fn denormalize_value(&self, j: usize, z: f64) -> f64 {
        let c = &self.columns[j];
        z * c.scale + c.shift
    }

    pub fn denormalize_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(j, &v)| self.denormalize_value(j, v)).collect()
    }

    pub fn normalize_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, &v)| self.normalize_value(j, v)).collect()
    }
}

/// Normalizes every non-indicator column. One-hot indicators stay 0/1.
pub fn normalize(ds: &Dataset, mode: Normalization) -> (Dataset, NormalizationStats) {
    let mut out = ds.clone();
    let n = ds.n_rows() as f64;
    let mut columns = Vec::with_capacity(ds.n_cols());
    for (j, col) in ds.columns.iter().enumerate() {
        let x = ds.values.column(j);
        let (shift, scale) = match (mode, &col.kind) {
            (Normalization::None, _) | (_, ColumnKind::Indicator { .. }) => (0.0, 1.0),
            (Normalization::Zscore, _) => {
                let mean = x.sum() / n;
                let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
            (Normalization::Minmax, _) => {
                let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
        };
        let stats = ColumnStats {
            name: col.name.clone(),
            shift,
            scale,
        };
        out.values
            .column_mut(j)
            .mapv_inplace(|v| if scale == 0.0 { 0.0 } else { (v - shift) / scale });
        columns.push(stats);
    }
    (
        out,
        NormalizationStats {
            mode,
            population_sd: true,
            columns,
        },
    )
}
