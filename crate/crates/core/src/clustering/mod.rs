//! Seeded clustering algorithms and hyperparameter selection.

mod dbscan;
mod fuzzy;
mod jacobi;
mod kmeans;
mod selection;
mod spectral;

pub use dbscan::dbscan;
pub use fuzzy::{fuzzy_cmeans, FuzzyAssignment};
pub use jacobi::{jacobi_eigh, Eigen};
pub use kmeans::{kmeans, kmeans_with_trace, KmeansRun};
pub use selection::{
    default_eps_grid, elbow_select_k, elbow_select_k_with, grid_search_dbscan, knee_from_curves, wgss,
    ElbowDiagnostics, GridCell, GridSearchResult,
};
pub use spectral::{spectral, SpectralEmbedding};

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("k range must hold at least 3 contiguous values, got {0}")]
    RangeTooSmall(usize),
    #[error("no grid cell produced a valid clustering")]
    NoValidCell,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} is reserved but not implemented")]
    NotImplemented(String),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringAlgorithm {
    Kmeans,
    FuzzyCmeans,
    Dbscan,
    Spectral,
    /// Reserved so reports keep the full algorithm grid; never runs.
    Hdbscan,
    /// Reserved so reports keep the full algorithm grid; never runs.
    RobustBorderPeeling,
}

impl ClusteringAlgorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Kmeans => "kmeans",
            Self::FuzzyCmeans => "fuzzy_cmeans",
            Self::Dbscan => "dbscan",
            Self::Spectral => "spectral",
            Self::Hdbscan => "hdbscan",
            Self::RobustBorderPeeling => "robust_border_peeling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::Kmeans,
            Self::FuzzyCmeans,
            Self::Dbscan,
            Self::Spectral,
            Self::Hdbscan,
            Self::RobustBorderPeeling,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
    }

    pub fn is_parametric(self) -> bool {
        matches!(self, Self::Kmeans | Self::FuzzyCmeans | Self::Spectral)
    }

    pub fn is_centroid_based(self) -> bool {
        matches!(self, Self::Kmeans | Self::FuzzyCmeans)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub algorithm: ClusteringAlgorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples: Option<usize>,
    pub fuzzifier: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Spectral clustering subsamples above this many rows.
    pub spectral_cap: usize,
}

impl ClusteringConfig {
    fn base(algorithm: ClusteringAlgorithm, seed: u64) -> Self {
        Self {
            algorithm,
            k: None,
            eps: None,
            min_samples: None,
            fuzzifier: 2.0,
            seed,
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            spectral_cap: 2000,
        }
    }

    pub fn kmeans(k: usize, seed: u64) -> Self {
        Self {
            k: Some(k),
            ..Self::base(ClusteringAlgorithm::Kmeans, seed)
        }
    }

    pub fn fuzzy_cmeans(k: usize, fuzzifier: f64, seed: u64) -> Self {
        Self {
            k: Some(k),
            fuzzifier,
            ..Self::base(ClusteringAlgorithm::FuzzyCmeans, seed)
        }
    }

    pub fn dbscan(eps: f64, min_samples: usize) -> Self {
        Self {
            eps: Some(eps),
            min_samples: Some(min_samples),
            ..Self::base(ClusteringAlgorithm::Dbscan, 0)
        }
    }

    pub fn spectral(k: usize, seed: u64) -> Self {
        Self {
            k: Some(k),
            ..Self::base(ClusteringAlgorithm::Spectral, seed)
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    /// Checks that exactly the parameters of the chosen algorithm are set and sane.
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        let bad = |m: &str| Err(ClusterError::InvalidConfig(m.to_string()));
        if self.restarts == 0 {
            return bad("restarts must be >= 1");
        }
        match self.algorithm {
            ClusteringAlgorithm::Kmeans | ClusteringAlgorithm::FuzzyCmeans | ClusteringAlgorithm::Spectral => {
                let Some(k) = self.k else { return bad("k is required") };
                if self.eps.is_some() || self.min_samples.is_some() {
                    return bad("eps/min_samples only apply to dbscan");
                }
                if k == 0 {
                    return bad("k must be positive");
                }
                if k > n_rows {
                    return Err(ClusterError::DegenerateInput(format!("k = {k} exceeds n = {n_rows}")));
                }
                if self.algorithm == ClusteringAlgorithm::FuzzyCmeans && !(self.fuzzifier > 1.0) {
                    return bad("fuzzifier must be > 1");
                }
            }
            ClusteringAlgorithm::Dbscan => {
                if self.k.is_some() {
                    return bad("k does not apply to dbscan");
                }
                match (self.eps, self.min_samples) {
                    (Some(e), Some(m)) if e > 0.0 && m >= 1 => {}
                    _ => return bad("dbscan needs eps > 0 and min_samples >= 1"),
                }
            }
            other => return Err(ClusterError::NotImplemented(other.as_str().into())),
        }
        Ok(())
    }
}

/// Hard cluster assignment. Non-noise labels are `0..k` in order of first
/// appearance; `-1` marks noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<i32>,
    pub centroids: Option<Array2<f64>>,
    pub inertia: Option<f64>,
    /// Algorithm-specific facts (spectral bandwidth, subsample size, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, f64>,
    /// Present for fuzzy c-means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuzzy: Option<FuzzyAssignment>,
}

impl Assignment {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }
}

/// Runs the configured algorithm.
pub fn run(x: ArrayView2<f64>, cfg: &ClusteringConfig) -> Result<Assignment> {
    cfg.validate(x.nrows())?;
    match cfg.algorithm {
        ClusteringAlgorithm::Kmeans => kmeans(x, cfg),
        ClusteringAlgorithm::FuzzyCmeans => fuzzy_cmeans(x, cfg).map(|f| f.harden()),
        ClusteringAlgorithm::Dbscan => Ok(dbscan(x, cfg)),
        ClusteringAlgorithm::Spectral => spectral(x, cfg),
        other => Err(ClusterError::NotImplemented(other.as_str().into())),
    }
}

/// Renumbers non-noise labels by first appearance. Returns the new labels and
/// `order[new] = old`.
pub(crate) fn canonical_labels(labels: &[i32]) -> (Vec<i32>, Vec<usize>) {
    let mut map: BTreeMap<i32, i32> = BTreeMap::new();
    let mut order = Vec::new();
    let out = labels
        .iter()
        .map(|&l| {
            if l < 0 {
                return -1;
            }
            *map.entry(l).or_insert_with(|| {
                order.push(l as usize);
                (order.len() - 1) as i32
            })
        })
        .collect();
    (out, order)
}

/// Means of the rows carrying each label `0..k`.
pub(crate) fn centroids_of(x: ArrayView2<f64>, labels: &[i32], k: usize) -> Array2<f64> {
    let mut sums = Array2::zeros((k, x.ncols()));
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            let l = l as usize;
            counts[l] += 1;
            let mut row = sums.row_mut(l);
            row += &x.row(i);
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums.row_mut(c).mapv_inplace(|v| v / n as f64);
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn canonical_relabel() {
        let (l, order) = canonical_labels(&[2, 2, -1, 0, 1, 0]);
        assert_eq!(l, vec![0, 0, -1, 1, 2, 1]);
        assert_eq!(order, vec![2, 0, 1]);
    }

    #[test]
    fn config_requires_relevant_params() {
        let mut cfg = ClusteringConfig::kmeans(2, 0);
        assert!(cfg.validate(4).is_ok());
        cfg.eps = Some(1.0);
        assert!(cfg.validate(4).is_err());
        assert!(matches!(
            ClusteringConfig::kmeans(5, 0).validate(4),
            Err(ClusterError::DegenerateInput(_))
        ));
        assert!(ClusteringConfig::dbscan(0.0, 2).validate(4).is_err());
        assert!(ClusteringConfig::fuzzy_cmeans(2, 1.0, 0).validate(4).is_err());
    }

    #[test]
    fn reserved_algorithms_do_not_run() {
        let mut cfg = ClusteringConfig::kmeans(2, 0);
        cfg.algorithm = ClusteringAlgorithm::Hdbscan;
        let x = array![[0.0], [1.0]];
        assert!(matches!(run(x.view(), &cfg), Err(ClusterError::NotImplemented(_))));
    }
}
