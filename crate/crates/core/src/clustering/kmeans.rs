use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{canonical_labels, Assignment, ClusterError, ClusteringConfig, Result};
use crate::linalg::{sq_dist_slice, ExactSum, UniqueRows};
use crate::rng::rng_for;

/// One Lloyd run: final state plus the inertia after every assignment step.
#[derive(Debug, Clone)]
pub struct KmeansRun {
    pub labels: Vec<i32>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub trace: Vec<f64>,
}

/// k-means++ seeding over unique rows, each drawn with probability
/// proportional to multiplicity times squared distance.
fn plus_plus_init(p: &UniqueRows, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = p.len();
    let n: usize = p.counts.iter().sum();
    let mut centers = Vec::with_capacity(k * p.dim);
    let first = p.inverse[rng.random_range(0..n)];
    centers.extend_from_slice(p.row(first));
    let mut d2: Vec<f64> = (0..m).map(|i| sq_dist_slice(p.row(i), p.row(first))).collect();
    for _ in 1..k {
        let weighted: Vec<f64> = d2.iter().zip(&p.counts).map(|(d, &c)| d * c as f64).collect();
        let total: f64 = weighted.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = m - 1;
            for (i, &w) in weighted.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            p.inverse[rng.random_range(0..n)]
        };
        centers.extend_from_slice(p.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist_slice(p.row(i), p.row(pick)));
        }
    }
    centers
}

fn nearest(xi: &[f64], centers: &[f64], k: usize) -> (usize, f64) {
    let d = xi.len();
    let mut best = (0, f64::INFINITY);
    for c in 0..k {
        let dc = sq_dist_slice(xi, &centers[c * d..(c + 1) * d]);
        if dc < best.1 {
            best = (c, dc);
        }
    }
    best
}

fn weighted_centroids(p: &UniqueRows, labels: &[i32], k: usize) -> Vec<f64> {
    let d = p.dim;
    let mut acc = vec![ExactSum::new(); k * d];
    let mut weight = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        let c = l as usize;
        weight[c] += p.counts[i];
        for (j, v) in p.row(i).iter().enumerate() {
            acc[c * d + j].add(v * p.counts[i] as f64);
        }
    }
    (0..k * d).map(|t| acc[t].value() / weight[t / d].max(1) as f64).collect()
}

/// Lloyd iterations on unique rows weighted by multiplicity; identical rows
/// always land in the same cluster so this matches the row-level run.
fn lloyd(p: &UniqueRows, mut centers: Vec<f64>, k: usize, max_iter: usize) -> KmeansRun {
    let m = p.len();
    let w = |i: usize| p.counts[i] as f64;
    let mut labels = vec![-1i32; m];
    let mut dists = vec![0.0; m];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for i in 0..m {
            let (c, d) = nearest(p.row(i), &centers, k);
            if labels[i] != c as i32 {
                labels[i] = c as i32;
                changed = true;
            }
            dists[i] = d;
        }
        trace.push((0..m).map(|i| w(i) * dists[i]).sum());
        if !changed {
            break;
        }
        // Refill empty clusters with the point currently farthest from its centre.
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l as usize] += p.counts[i];
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..m)
                    .filter(|&i| counts[labels[i] as usize] > p.counts[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    counts[labels[i] as usize] -= p.counts[i];
                    labels[i] = c as i32;
                    counts[c] = p.counts[i];
                    dists[i] = 0.0;
                }
            }
        }
        centers = weighted_centroids(p, &labels, k);
    }
    let d = p.dim;
    let inertia = (0..m)
        .map(|i| {
            let c = labels[i] as usize;
            w(i) * sq_dist_slice(p.row(i), &centers[c * d..(c + 1) * d])
        })
        .sum();
    KmeansRun {
        labels: p.inverse.iter().map(|&u| labels[u]).collect(),
        centroids: Array2::from_shape_vec((k, d), centers).expect("k × d centres"),
        inertia,
        trace,
    }
}

/// Best of `cfg.restarts` k-means++ seeded Lloyd runs, with the per-restart
/// inertia traces.
pub fn kmeans_with_trace(x: ArrayView2<f64>, cfg: &ClusteringConfig) -> Result<(Assignment, Vec<KmeansRun>)> {
    let k = cfg.k.ok_or_else(|| ClusterError::InvalidConfig("k is required".into()))?;
    let n = x.nrows();
    if k == 0 || n < k {
        return Err(ClusterError::DegenerateInput(format!("need n >= k, got n = {n}, k = {k}")));
    }
    let p = UniqueRows::of(x);
    if p.len() < k {
        return Err(ClusterError::DegenerateInput(format!("need k distinct rows, got {} for k = {k}", p.len())));
    }
    let runs: Vec<KmeansRun> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(cfg.seed, &format!("kmeans/{k}/{r}"));
            lloyd(&p, plus_plus_init(&p, k, &mut rng), k, cfg.max_iter)
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.inertia.total_cmp(&b.1.inertia).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let run = &runs[best];
    let (labels, order) = canonical_labels(&run.labels);
    let centroids = run.centroids.select(ndarray::Axis(0), &order);
    let assignment = Assignment {
        labels,
        centroids: Some(centroids),
        inertia: Some(run.inertia),
        metadata: Default::default(),
        fuzzy: None,
    };
    Ok((assignment, runs))
}

pub fn kmeans(x: ArrayView2<f64>, cfg: &ClusteringConfig) -> Result<Assignment> {
    kmeans_with_trace(x, cfg).map(|(a, _)| a)
}
