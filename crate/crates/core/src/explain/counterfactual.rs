use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{Classifier, ExplainError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualConfig {
    pub lambda_init: f64,
    pub lambda_growth: f64,
    pub max_outer: usize,
    /// Step size in range-normalized units.
    pub step: f64,
    pub inner_iters: usize,
    pub seed: u64,
}

impl Default for CounterfactualConfig {
    fn default() -> Self {
        Self {
            lambda_init: 1.0,
            lambda_growth: 3.0,
            max_outer: 20,
            step: 0.05,
            inner_iters: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proximity {
    pub value: f64,
    /// Features with zero range whose change entered unscaled.
    pub unscaled: Vec<usize>,
}

/// `(1/d)·Σ|xᵢ−x′ᵢ|/rangeᵢ`.
pub fn cf_proximity(x: ArrayView1<f64>, x_cf: ArrayView1<f64>, ranges: &[f64]) -> Proximity {
    let d = x.len().max(1) as f64;
    let mut unscaled = Vec::new();
    let mut total = 0.0;
    for j in 0..x.len() {
        let delta = (x[j] - x_cf[j]).abs();
        if ranges[j] > 0.0 {
            total += delta / ranges[j];
        } else {
            if delta > 0.0 {
                unscaled.push(j);
            }
            total += delta;
        }
    }
    Proximity {
        value: total / d,
        unscaled,
    }
}

/// Number of coordinates that differ by more than `1e-12`.
pub fn cf_sparsity(x: ArrayView1<f64>, x_cf: ArrayView1<f64>) -> usize {
    x.iter().zip(x_cf.iter()).filter(|(a, b)| (*a - *b).abs() > 1e-12).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub original: Vec<f64>,
    pub counterfactual: Vec<f64>,
    pub target_class: i32,
    pub proximity: f64,
    pub sparsity: usize,
    pub changed_features: Vec<usize>,
    pub trace_len: usize,
    pub lambda: f64,
    pub used_gradient: bool,
    pub unscaled_features: Vec<usize>,
}

struct Problem<'a> {
    clf: &'a dyn Classifier,
    x: ArrayView1<'a, f64>,
    ranges: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    target_col: usize,
}

impl Problem<'_> {
    fn d(&self) -> usize {
        self.x.len()
    }

    /// Point for range-normalized offsets `u`, clamped to the box.
    fn point(&self, u: &[f64]) -> Array1<f64> {
        Array1::from_iter((0..self.d()).map(|j| (self.x[j] + u[j] * self.ranges[j]).clamp(self.lo[j], self.hi[j])))
    }

    fn offsets(&self, p: &Array1<f64>) -> Vec<f64> {
        (0..self.d()).map(|j| (p[j] - self.x[j]) / self.ranges[j]).collect()
    }

    fn objective_of(&self, prob: f64, u: &[f64], lambda: f64) -> f64 {
        lambda * (prob - 1.0).powi(2) + u.iter().map(|v| v.abs()).sum::<f64>() / self.d() as f64
    }

    fn is_target(&self, p: &Array1<f64>) -> bool {
        let m = p.view().insert_axis(ndarray::Axis(0));
        self.clf.predict_columns(m)[0] == self.target_col
    }

    fn prob(&self, p: &Array1<f64>) -> f64 {
        let m = p.view().insert_axis(ndarray::Axis(0));
        self.clf.predict_proba(m)[[0, self.target_col]]
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// One λ stage of proximal gradient descent on the offsets.
fn proximal_stage(pb: &Problem<'_>, u: &mut [f64], lambda: f64, cfg: &CounterfactualConfig, trace: &mut usize) -> bool {
    let d = pb.d();
    for _ in 0..cfg.inner_iters {
        let p = pb.point(u);
        if pb.is_target(&p) {
            return true;
        }
        *trace += 1;
        let Some(g) = pb.clf.gradient(p.view(), pb.target_col) else {
            return false;
        };
        let prob = pb.prob(&p);
        let scale = 2.0 * lambda * (prob - 1.0);
        let mut moved = false;
        for j in 0..d {
            let grad_u = scale * g[j] * pb.ranges[j];
            let next = soft_threshold(u[j] - cfg.step * grad_u, cfg.step / d as f64);
            let clamped = pb.offsets(&pb.point(&{
                let mut t = u.to_vec();
                t[j] = next;
                t
            }))[j];
            if clamped != u[j] {
                moved = true;
            }
            u[j] = clamped;
        }
        if !moved {
            break;
        }
    }
    pb.is_target(&pb.point(u))
}

const LINE_STEPS: [f64; 6] = [0.01, 0.05, 0.1, 0.25, 0.5, 1.0];

/// One λ stage of greedy coordinate line search (no gradients needed).
fn coordinate_stage(pb: &Problem<'_>, u: &mut Vec<f64>, lambda: f64, cfg: &CounterfactualConfig, trace: &mut usize) -> bool {
    let d = pb.d();
    for _ in 0..cfg.inner_iters {
        let here = pb.point(u);
        if pb.is_target(&here) {
            return true;
        }
        *trace += 1;
        let current = pb.objective_of(pb.prob(&here), u, lambda);
        let mut moves = Vec::with_capacity(2 * d * LINE_STEPS.len());
        for j in 0..d {
            for &s in &LINE_STEPS {
                for sign in [1.0, -1.0] {
                    let mut t = u.clone();
                    t[j] += sign * s;
                    let p = pb.point(&t);
                    moves.push(pb.offsets(&p));
                }
            }
        }
        let mut batch = Array2::zeros((moves.len(), d));
        for (i, m) in moves.iter().enumerate() {
            batch.row_mut(i).assign(&pb.point(m));
        }
        let proba = pb.clf.predict_proba(batch.view());
        let best = moves
            .iter()
            .enumerate()
            .map(|(i, m)| (i, pb.objective_of(proba[[i, pb.target_col]], m, lambda)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match best {
            Some((i, obj)) if obj < current - 1e-15 => *u = moves[i].clone(),
            _ => break,
        }
    }
    pb.is_target(&pb.point(u))
}

/// Searches for a nearby point classified as `target` by minimizing
/// `λ·(p_target(x′)−1)² + mean_j |x′_j−x_j|/range_j`, growing λ until the class
/// flips, then reverting changes that are not needed for the flip.
/// `lo`/`hi` bound the search box (widened to contain `x`).
pub fn counterfactual_search(
    clf: &dyn Classifier,
    x: ArrayView1<f64>,
    target: i32,
    lo: &[f64],
    hi: &[f64],
    cfg: &CounterfactualConfig,
) -> Result<Counterfactual> {
    let d = x.len();
    if clf.n_features() != d || lo.len() != d || hi.len() != d {
        return Err(ExplainError::ShapeMismatch {
            expected: clf.n_features(),
            found: d,
        });
    }
    let target_col = clf.class_column(target).ok_or(ExplainError::UnknownClass(target))?;
    let lo: Vec<f64> = (0..d).map(|j| lo[j].min(x[j])).collect();
    let hi: Vec<f64> = (0..d).map(|j| hi[j].max(x[j])).collect();
    let ranges: Vec<f64> = (0..d).map(|j| hi[j] - lo[j]).collect();
    let pb = Problem {
        clf,
        x,
        ranges: ranges.iter().map(|&r| if r > 0.0 { r } else { 1.0 }).collect(),
        lo,
        hi,
        target_col,
    };
    if pb.is_target(&x.to_owned()) {
        return Err(ExplainError::AlreadyTarget(target));
    }
    let used_gradient = clf.gradient(x, target_col).is_some();
    let mut u = vec![0.0; d];
    let mut lambda = cfg.lambda_init;
    let mut trace = 0;
    let mut flipped = false;
    for _ in 0..cfg.max_outer.max(1) {
        flipped = if used_gradient {
            proximal_stage(&pb, &mut u, lambda, cfg, &mut trace)
        } else {
            coordinate_stage(&pb, &mut u, lambda, cfg, &mut trace)
        };
        if flipped {
            break;
        }
        lambda *= cfg.lambda_growth;
    }
    if !flipped {
        return Err(ExplainError::NoCounterfactualFound(cfg.max_outer));
    }

    // Sparsity pass: revert the smallest changes first while the class holds.
    let mut point = pb.point(&u);
    let mut changed: Vec<usize> = (0..d).filter(|&j| point[j] != x[j]).collect();
    changed.sort_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()).then(a.cmp(&b)));
    for j in changed {
        let keep = point[j];
        point[j] = x[j];
        if !pb.is_target(&point) {
            point[j] = keep;
        }
    }
    debug_assert!(pb.is_target(&point));
    let prox = cf_proximity(x, point.view(), &ranges);
    Ok(Counterfactual {
        original: x.to_vec(),
        counterfactual: point.to_vec(),
        target_class: target,
        proximity: prox.value,
        sparsity: cf_sparsity(x, point.view()),
        changed_features: (0..d).filter(|&j| (point[j] - x[j]).abs() > 1e-12).collect(),
        trace_len: trace,
        lambda,
        used_gradient,
        unscaled_features: prox.unscaled,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testing::{NamedLogistic, Step};
    use super::*;
    use ndarray::array;

    #[test]
    fn proximity_and_sparsity_arithmetic() {
        let x = array![1.0, 2.0];
        assert_eq!(cf_proximity(x.view(), x.view(), &[1.0, 1.0]).value, 0.0);
        assert_eq!(cf_sparsity(x.view(), x.view()), 0);
        let y = array![3.0, 2.0];
        assert_eq!(cf_proximity(x.view(), y.view(), &[2.0, 5.0]).value, 0.5);
        assert_eq!(cf_sparsity(x.view(), y.view()), 1);
        let p = cf_proximity(x.view(), y.view(), &[0.0, 5.0]);
        assert_eq!((p.value, p.unscaled), (1.0, vec![0]));
    }

    #[test]
    fn crosses_one_dimensional_threshold() {
        let bb = NamedLogistic::new(&[("a", 2.0)], -1.0);
        let x = array![-1.0];
        let cf = counterfactual_search(&bb, x.view(), 1, &[-3.0], &[3.0], &CounterfactualConfig::default()).unwrap();
        assert!(cf.counterfactual[0] > 0.5);
        assert_eq!(bb.predict_label_row(ndarray::ArrayView1::from(&cf.counterfactual)), 1);
        assert!(cf.used_gradient);
    }

    #[test]
    fn ignored_feature_is_reverted() {
        let bb = NamedLogistic::new(&[("a", 3.0), ("b", 0.0)], 0.0);
        let x = array![-0.5, 0.7];
        let cf = counterfactual_search(&bb, x.view(), 1, &[-2.0, -2.0], &[2.0, 2.0], &CounterfactualConfig::default()).unwrap();
        assert_eq!(cf.counterfactual[1], 0.7);
        assert_eq!(cf.sparsity, 1);
        assert_eq!(cf.changed_features, vec![0]);
        assert!(cf.proximity <= 1.0);
    }

    #[test]
    fn line_search_without_gradient() {
        let bb = Step {
            d: 2,
            feature: 1,
            threshold: 0.2,
        };
        let x = array![0.0, -0.4];
        let cf = counterfactual_search(&bb, x.view(), 1, &[-1.0, -1.0], &[1.0, 1.0], &CounterfactualConfig::default()).unwrap();
        assert!(!cf.used_gradient);
        assert!(cf.counterfactual[1] > 0.2);
        assert_eq!(cf.sparsity, 1);
    }

    #[test]
    fn unreachable_target_reports_failure() {
        let bb = Step {
            d: 1,
            feature: 0,
            threshold: 10.0,
        };
        let cfg = CounterfactualConfig {
            max_outer: 3,
            inner_iters: 20,
            ..Default::default()
        };
        assert!(matches!(
            counterfactual_search(&bb, array![0.0].view(), 1, &[-1.0], &[1.0], &cfg),
            Err(ExplainError::NoCounterfactualFound(3))
        ));
    }
}
