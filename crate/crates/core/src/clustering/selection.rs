use std::ops::RangeInclusive;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{centroids_of, dbscan, kmeans, Assignment, ClusterError, ClusteringConfig, Result};
use crate::data::quantile_sorted;
use crate::linalg::{sq_dist, sq_dist_slice, UniqueRows};
use crate::rng::rng_for;
use crate::validity::silhouette_sampled;

/// Silhouette is computed on at most this many rows during selection.
pub const SELECTION_SILHOUETTE_CAP: usize = 2000;

const KNEE_RULE: &str = "argmax over interior k of I(k-1) - 2 I(k) + I(k+1); ties -> higher silhouette, then smaller k";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowDiagnostics {
    /// Every k evaluated, including the `k_min - 1` baseline when `k_min >= 2`.
    pub k_values: Vec<usize>,
    pub inertia: Vec<f64>,
    pub silhouette: Vec<Option<f64>>,
    /// `(k, second difference)` for every knee candidate.
    pub knee_scores: Vec<(usize, f64)>,
    pub chosen_k: usize,
    pub tie_broken_by_silhouette: bool,
    pub rule: String,
}

/// Within-group sum of squares about cluster means; noise rows are ignored.
pub fn wgss(x: ArrayView2<f64>, labels: &[i32]) -> f64 {
    let k = labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0);
    let c = centroids_of(x, labels, k);
    labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= 0)
        .map(|(i, &l)| sq_dist(x.row(i), c.row(l as usize)))
        .sum()
}

/// Picks the knee of an inertia curve. `k_values`, `inertia` and `silhouette`
/// are aligned; the first and last entries only serve as neighbours.
pub fn knee_from_curves(k_values: &[usize], inertia: &[f64], silhouette: &[Option<f64>]) -> Result<(usize, Vec<(usize, f64)>, bool)> {
    if k_values.len() < 3 || inertia.len() != k_values.len() || silhouette.len() != k_values.len() {
        return Err(ClusterError::RangeTooSmall(k_values.len()));
    }
    let scores: Vec<(usize, f64)> = (1..k_values.len() - 1)
        .map(|i| (i, inertia[i - 1] - 2.0 * inertia[i] + inertia[i + 1]))
        .collect();
    let scale = inertia.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let tol = 1e-9 * scale;
    let top = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = scores.iter().filter(|s| s.1 >= top - tol).map(|s| s.0).collect();
    let sil = |i: usize| silhouette[i].unwrap_or(f64::NEG_INFINITY);
    let best = tied
        .iter()
        .copied()
        .max_by(|&a, &b| sil(a).total_cmp(&sil(b)).then(k_values[b].cmp(&k_values[a])))
        .expect("non-empty");
    let table = scores.iter().map(|&(i, s)| (k_values[i], s)).collect();
    Ok((k_values[best], table, tied.len() > 1))
}

fn check_range(k_range: &RangeInclusive<usize>) -> Result<()> {
    let len = if k_range.is_empty() { 0 } else { k_range.end() - k_range.start() + 1 };
    if len < 3 || *k_range.start() == 0 {
        return Err(ClusterError::RangeTooSmall(len));
    }
    Ok(())
}

/// Elbow selection for any parametric algorithm: `fit(k)` clusters the data
/// and the curve is the within-group sum of squares of the result.
pub fn elbow_select_k_with<F>(x: ArrayView2<f64>, k_range: RangeInclusive<usize>, seed: u64, fit: F) -> Result<(usize, ElbowDiagnostics)>
where
    F: Fn(usize) -> Result<Assignment>,
{
    check_range(&k_range)?;
    let lo = if *k_range.start() >= 2 { k_range.start() - 1 } else { *k_range.start() };
    let hi = (*k_range.end()).min(x.nrows());
    if hi < lo + 2 {
        return Err(ClusterError::RangeTooSmall(hi.saturating_sub(lo) + 1));
    }
    let mut k_values = Vec::new();
    let mut inertia = Vec::new();
    let mut silhouette = Vec::new();
    for k in lo..=hi {
        let a = if k == 1 {
            Assignment {
                labels: vec![0; x.nrows()],
                centroids: None,
                inertia: None,
                metadata: Default::default(),
                fuzzy: None,
            }
        } else {
            fit(k)?
        };
        k_values.push(k);
        inertia.push(a.inertia.unwrap_or_else(|| wgss(x, &a.labels)));
        silhouette.push(if k >= 2 {
            silhouette_sampled(x, &a.labels, SELECTION_SILHOUETTE_CAP, seed).ok()
        } else {
            None
        });
    }
    let (chosen_k, knee_scores, tie) = knee_from_curves(&k_values, &inertia, &silhouette)?;
    Ok((
        chosen_k,
        ElbowDiagnostics {
            k_values,
            inertia,
            silhouette,
            knee_scores,
            chosen_k,
            tie_broken_by_silhouette: tie,
            rule: KNEE_RULE.to_string(),
        },
    ))
}

/// Elbow selection with k-means inertia.
pub fn elbow_select_k(x: ArrayView2<f64>, k_range: RangeInclusive<usize>, seed: u64) -> Result<(usize, ElbowDiagnostics)> {
    elbow_select_k_with(x, k_range, seed, |k| kmeans(x, &ClusteringConfig::kmeans(k, seed)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub eps: f64,
    pub min_samples: usize,
    pub n_clusters: usize,
    pub n_noise: usize,
    /// Silhouette over non-noise rows; `None` marks a rejected cell (scored −∞).
    pub score: Option<f64>,
}

impl GridCell {
    pub fn score_value(&self) -> f64 {
        self.score.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub eps: f64,
    pub min_samples: usize,
    pub best_index: usize,
    pub cells: Vec<GridCell>,
    pub assignment: Assignment,
}

/// Exhaustive DBSCAN grid. Cells with fewer than two clusters or more than
/// half the rows as noise score −∞; silhouette excludes noise rows.
pub fn grid_search_dbscan(x: ArrayView2<f64>, eps_grid: &[f64], min_samples_grid: &[usize], seed: u64) -> Result<GridSearchResult> {
    if eps_grid.is_empty() || min_samples_grid.is_empty() {
        return Err(ClusterError::InvalidConfig("grids must be non-empty".into()));
    }
    let cells: Vec<(f64, usize)> = eps_grid
        .iter()
        .flat_map(|&e| min_samples_grid.iter().map(move |&m| (e, m)))
        .collect();
    let n = x.nrows();
    let evaluated: Vec<(GridCell, Assignment)> = cells
        .par_iter()
        .map(|&(eps, min_samples)| {
            let cfg = ClusteringConfig::dbscan(eps, min_samples);
            let a = if cfg.validate(n).is_ok() {
                dbscan(x, &cfg)
            } else {
                Assignment {
                    labels: vec![-1; n],
                    centroids: None,
                    inertia: None,
                    metadata: Default::default(),
                    fuzzy: None,
                }
            };
            let n_clusters = a.n_clusters();
            let n_noise = a.n_noise();
            let score = if n_clusters < 2 || 2 * n_noise > n {
                None
            } else {
                silhouette_sampled(x, &a.labels, SELECTION_SILHOUETTE_CAP, seed).ok()
            };
            (GridCell { eps, min_samples, n_clusters, n_noise, score }, a)
        })
        .collect();
    let best = evaluated
        .iter()
        .enumerate()
        .filter(|(_, (c, _))| c.score.is_some())
        .max_by(|a, b| a.1 .0.score_value().total_cmp(&b.1 .0.score_value()).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .ok_or(ClusterError::NoValidCell)?;
    let (cells, mut assignments): (Vec<GridCell>, Vec<Assignment>) = evaluated.into_iter().unzip();
    Ok(GridSearchResult {
        eps: cells[best].eps,
        min_samples: cells[best].min_samples,
        best_index: best,
        assignment: assignments.swap_remove(best),
        cells,
    })
}

/// `n_values` eps candidates taken as quantiles (0.5 to 0.98) of the distance
/// to each row's `min_samples`-th distinct neighbour, counting the row itself.
/// Exact duplicates are collapsed first so replicated rows do not pin every
/// quantile at zero.
pub fn default_eps_grid(x: ArrayView2<f64>, min_samples: usize, n_values: usize, seed: u64) -> Vec<f64> {
    let u = UniqueRows::of(x);
    let n = u.len();
    if n < 2 || n_values == 0 {
        return vec![1.0];
    }
    let probes: Vec<usize> = if n > SELECTION_SILHOUETTE_CAP {
        let mut rng = rng_for(seed, "eps-grid");
        let mut idx = rand::seq::index::sample(&mut rng, n, SELECTION_SILHOUETTE_CAP).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let kth = min_samples.clamp(1, n) - 1;
    let mut kdist: Vec<f64> = probes
        .par_iter()
        .map(|&p| {
            let mut d: Vec<f64> = (0..n).map(|q| sq_dist_slice(u.row(p), u.row(q))).collect();
            d.select_nth_unstable_by(kth, f64::total_cmp);
            d[kth].sqrt()
        })
        .collect();
    kdist.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = (0..n_values)
        .map(|i| {
            let q = if n_values == 1 { 0.9 } else { 0.5 + 0.48 * i as f64 / (n_values - 1) as f64 };
            quantile_sorted(&kdist, q)
        })
        .filter(|e| *e > 0.0)
        .collect();
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    if grid.is_empty() {
        grid.push(kdist.last().copied().filter(|v| *v > 0.0).unwrap_or(1.0));
    }
    grid
}
