use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{canonical_labels, Assignment, ClusterError, ClusteringConfig, Result};
use crate::linalg::{sq_dist_slice, UniqueRows};
use crate::rng::rng_for;

/// Soft assignment: `membership` is n×k with rows summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyAssignment {
    pub membership: Array2<f64>,
    pub centers: Array2<f64>,
    pub fuzzifier: f64,
    pub objective: f64,
    /// Objective after every membership update of the winning restart.
    pub objective_trace: Vec<f64>,
}

impl FuzzyAssignment {
    fn argmax_labels(&self) -> Vec<i32> {
        self.membership
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |b, (j, &u)| if u > b.1 { (j, u) } else { b })
                    .0 as i32
            })
            .collect()
    }

    /// Argmax labels, canonically renumbered.
    pub fn hard_labels(&self) -> Vec<i32> {
        canonical_labels(&self.argmax_labels()).0
    }

    pub fn harden(self) -> Assignment {
        let (labels, order) = canonical_labels(&self.argmax_labels());
        let centroids = self.centers.select(Axis(0), &order);
        Assignment {
            labels,
            centroids: Some(centroids),
            inertia: None,
            metadata: [("objective".to_string(), self.objective)].into_iter().collect(),
            fuzzy: Some(self),
        }
    }
}

/// Unique rows with multiplicities; identical rows always share memberships,
/// so every update runs once per distinct row.
struct Points {
    rows: UniqueRows,
    weights: Vec<f64>,
}

impl Points {
    fn new(x: ArrayView2<f64>) -> Self {
        let rows = UniqueRows::of(x);
        let weights = rows.counts.iter().map(|&c| c as f64).collect();
        Self { rows, weights }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.rows.dim
    }
}

fn pow_m(v: f64, m: f64) -> f64 {
    if m == 2.0 {
        v * v
    } else {
        v.powf(m)
    }
}

/// Row-major `len × k` memberships, `u_ij ∝ d_ij^(-2/(m-1))`.
fn update_membership(p: &Points, centers: &[f64], k: usize, m: f64) -> Vec<f64> {
    let d = p.dim();
    let exponent = -1.0 / (m - 1.0);
    let mut u = vec![0.0; p.len() * k];
    let mut d2 = vec![0.0; k];
    for i in 0..p.len() {
        let xi = p.rows.row(i);
        for (j, slot) in d2.iter_mut().enumerate() {
            *slot = sq_dist_slice(xi, &centers[j * d..(j + 1) * d]);
        }
        let ui = &mut u[i * k..(i + 1) * k];
        let zeros = d2.iter().filter(|&&v| v == 0.0).count();
        if zeros > 0 {
            // Point coincides with a centre: all membership there.
            for j in 0..k {
                ui[j] = if d2[j] == 0.0 { 1.0 / zeros as f64 } else { 0.0 };
            }
            continue;
        }
        let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        for j in 0..k {
            let r = d2[j] / min;
            ui[j] = if exponent == -1.0 { 1.0 / r } else { r.powf(exponent) };
        }
        let total: f64 = ui.iter().sum();
        ui.iter_mut().for_each(|v| *v /= total);
    }
    u
}

fn update_centers(p: &Points, u: &[f64], k: usize, m: f64, previous: &[f64]) -> Vec<f64> {
    let d = p.dim();
    let mut centers = vec![0.0; k * d];
    for j in 0..k {
        let w: Vec<f64> = (0..p.len()).map(|i| p.weights[i] * pow_m(u[i * k + j], m)).collect();
        let total: f64 = w.iter().sum();
        let c = &mut centers[j * d..(j + 1) * d];
        if total <= 0.0 {
            c.copy_from_slice(&previous[j * d..(j + 1) * d]);
            continue;
        }
        for (i, wi) in w.iter().enumerate() {
            let f = wi / total;
            for (cv, xv) in c.iter_mut().zip(p.rows.row(i)) {
                *cv += f * xv;
            }
        }
    }
    centers
}

fn objective(p: &Points, u: &[f64], centers: &[f64], k: usize, m: f64) -> f64 {
    let d = p.dim();
    let mut j_m = 0.0;
    for i in 0..p.len() {
        let xi = p.rows.row(i);
        let mut row = 0.0;
        for j in 0..k {
            row += pow_m(u[i * k + j], m) * sq_dist_slice(xi, &centers[j * d..(j + 1) * d]);
        }
        j_m += p.weights[i] * row;
    }
    j_m
}

/// Fuzzy c-means by alternating membership/centre updates until the objective
/// improves by less than `cfg.tol`. Best of `cfg.restarts` seeded starts.
pub fn fuzzy_cmeans(x: ArrayView2<f64>, cfg: &ClusteringConfig) -> Result<FuzzyAssignment> {
    let k = cfg.k.ok_or_else(|| ClusterError::InvalidConfig("k is required".into()))?;
    let m = cfg.fuzzifier;
    if !(m > 1.0) {
        return Err(ClusterError::InvalidConfig("fuzzifier must be > 1".into()));
    }
    let n = x.nrows();
    let p = Points::new(x);
    if k == 0 || p.len() < k {
        return Err(ClusterError::DegenerateInput(format!(
            "need at least k distinct rows, got {} of {n}, k = {k}",
            p.len()
        )));
    }
    let d = p.dim();
    let runs: Vec<(Vec<f64>, Vec<f64>, f64, Vec<f64>)> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(cfg.seed, &format!("fcm/{k}/{r}"));
            // Distinct random points as initial centres.
            let mut picks: Vec<usize> = Vec::with_capacity(k);
            while picks.len() < k {
                let u = p.rows.inverse[rng.random_range(0..n)];
                if !picks.contains(&u) {
                    picks.push(u);
                }
            }
            let mut centers: Vec<f64> = picks.iter().flat_map(|&u| p.rows.row(u).to_vec()).collect();
            let mut u = update_membership(&p, &centers, k, m);
            let mut obj = objective(&p, &u, &centers, k, m);
            let mut trace = vec![obj];
            for _ in 0..cfg.max_iter {
                centers = update_centers(&p, &u, k, m, &centers);
                u = update_membership(&p, &centers, k, m);
                let next = objective(&p, &u, &centers, k, m);
                trace.push(next);
                let improvement = obj - next;
                obj = next;
                if improvement < cfg.tol {
                    break;
                }
            }
            (u, centers, obj, trace)
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .2.total_cmp(&b.1 .2).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let (u, centers, objective, objective_trace) = runs.into_iter().nth(best).expect("index valid");
    let membership = Array2::from_shape_fn((n, k), |(i, j)| u[p.rows.inverse[i] * k + j]);
    Ok(FuzzyAssignment {
        membership,
        centers: Array2::from_shape_vec((k, d), centers).expect("k × d centres"),
        fuzzifier: m,
        objective,
        objective_trace,
    })
}
