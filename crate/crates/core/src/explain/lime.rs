use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{argmax, Classifier, ExplainError, FeatureImportanceVector, Result};
use crate::linalg::solve_spd;
use crate::rng::rng_for;

/// Per-feature location and scale of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features get 1.
    pub sd: Vec<f64>,
}

impl FeatureStats {
    pub fn from_data(names: &[String], x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).sum() / n).collect();
        let sd = (0..x.ncols())
            .map(|j| {
                let v = x.column(j).iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            names: names.to_vec(),
            mean,
            sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Defaults to `0.75·√d`.
    pub kernel_width: Option<f64>,
    pub ridge_l2: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: None,
            ridge_l2: 1.0,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, d: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (d as f64).sqrt())
    }
}

/// Weighted ridge fit of the target-class probability on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub target_class: i32,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl LocalModel {
    pub fn predict(&self, z: ArrayView1<f64>) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| c * (z[j] - self.mean[j]) / self.sd[j])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct LimeOutcome {
    pub importance: FeatureImportanceVector,
    pub local_model: LocalModel,
    pub perturbations: Array2<f64>,
    pub weights: Vec<f64>,
}

/// LIME for tabular data. Perturbation columns come from per-feature streams
/// keyed by feature name and the regression runs in name order, so permuting
/// the input columns permutes the result exactly.
pub fn lime_explain(
    clf: &dyn Classifier,
    x: ArrayView1<f64>,
    target: i32,
    stats: &FeatureStats,
    cfg: &LimeConfig,
) -> Result<LimeOutcome> {
    let d = x.len();
    if stats.names.len() != d || clf.n_features() != d {
        return Err(ExplainError::ShapeMismatch {
            expected: clf.n_features(),
            found: d,
        });
    }
    if cfg.n_samples < 10 * d.max(1) {
        return Err(ExplainError::InvalidConfig(format!("n_samples must be >= 10·d = {}", 10 * d)));
    }
    let target_col = clf.class_column(target).ok_or(ExplainError::UnknownClass(target))?;
    let n = cfg.n_samples;
    let width = cfg.kernel_width_for(d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| stats.names[a].cmp(&stats.names[b]));

    let mut z = Array2::zeros((n, d));
    for j in 0..d {
        let mut rng = rng_for(cfg.seed, &format!("lime/{}", stats.names[j]));
        let normal = Normal::new(x[j], stats.sd[j]).map_err(|e| ExplainError::InvalidConfig(e.to_string()))?;
        for i in 0..n {
            z[[i, j]] = normal.sample(&mut rng);
        }
    }
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let d2: f64 = order.iter().map(|&j| ((z[[i, j]] - x[j]) / stats.sd[j]).powi(2)).sum();
            (-d2 / (width * width)).exp()
        })
        .collect();
    let proba = clf.predict_proba(z.view());
    let y: Vec<f64> = (0..n).map(|i| proba[[i, target_col]]).collect();

    let p = d + 1;
    let design = |i: usize, c: usize| -> f64 {
        if c == 0 {
            1.0
        } else {
            let j = order[c - 1];
            (z[[i, j]] - stats.mean[j]) / stats.sd[j]
        }
    };
    let y_const = y.iter().all(|&v| v == y[0]);
    let cols_const = (1..p).all(|c| (0..n).all(|i| design(i, c) == design(0, c)));
    if y_const && cols_const {
        return Err(ExplainError::DegenerateNeighborhood);
    }
    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    let mut row = vec![0.0; p];
    for i in 0..n {
        for (c, r) in row.iter_mut().enumerate() {
            *r = design(i, c);
        }
        let w = weights[i];
        for r in 0..p {
            b[r] += w * row[r] * y[i];
            for c in r..p {
                a[r * p + c] += w * row[r] * row[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            a[r * p + c] = a[c * p + r];
        }
        if r > 0 {
            a[r * p + r] += cfg.ridge_l2;
        }
    }
    let beta = solve_spd(&a, &b).ok_or(ExplainError::DegenerateNeighborhood)?;
    let mut coefficients = vec![0.0; d];
    for (c, &j) in order.iter().enumerate() {
        coefficients[j] = beta[c + 1];
    }
    let local_model = LocalModel {
        target_class: target,
        intercept: beta[0],
        coefficients: coefficients.clone(),
        mean: stats.mean.clone(),
        sd: stats.sd.clone(),
    };
    let mut metadata = BTreeMap::new();
    metadata.insert("n_samples".into(), n as f64);
    metadata.insert("kernel_width".into(), width);
    metadata.insert("ridge_l2".into(), cfg.ridge_l2);
    let importance = FeatureImportanceVector {
        method: "lime".into(),
        instance_id: None,
        target_class: target,
        weights: stats.names.iter().cloned().zip(coefficients).collect(),
        intercept: beta[0],
        metadata,
    };
    Ok(LimeOutcome {
        importance,
        local_model,
        perturbations: z,
        weights,
    })
}

/// Kernel-weighted rate at which the local model (target iff `g(z) >= 0.5`)
/// and the black box (target iff argmax) agree on the perturbations.
pub fn lime_fidelity(local: &LocalModel, clf: &dyn Classifier, perturbations: ArrayView2<f64>, weights: &[f64]) -> Result<f64> {
    if perturbations.nrows() == 0 || weights.len() != perturbations.nrows() {
        return Err(ExplainError::EmptySample);
    }
    let target_col = clf
        .class_column(local.target_class)
        .ok_or(ExplainError::UnknownClass(local.target_class))?;
    let proba = clf.predict_proba(perturbations);
    let (mut agree, mut total) = (0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        let bb = argmax(proba.row(i).iter().copied()) == target_col;
        let lm = local.predict(perturbations.row(i)) >= 0.5;
        total += w;
        if bb == lm {
            agree += w;
        }
    }
    if total <= 0.0 {
        return Err(ExplainError::EmptySample);
    }
    Ok(agree / total)
}

#[cfg(test)]
mod tests {
    use super::super::testing::NamedLogistic;
    use super::*;
    use ndarray::array;

    fn stats(names: &[&str]) -> FeatureStats {
        FeatureStats {
            names: names.iter().map(|s| s.to_string()).collect(),
            mean: vec![0.0; names.len()],
            sd: vec![1.0; names.len()],
        }
    }

    fn cfg(seed: u64) -> LimeConfig {
        LimeConfig {
            seed,
            ..LimeConfig::default()
        }
    }

    #[test]
    fn recovers_linear_signs_and_order() {
        let bb = NamedLogistic::new(&[("f1", 3.0), ("f2", -2.0), ("f3", 0.0)], 0.0);
        let st = stats(&["f1", "f2", "f3"]);
        for seed in 0..20 {
            let out = lime_explain(&bb, array![0.1, -0.2, 0.3].view(), 1, &st, &cfg(seed)).unwrap();
            let w = &out.importance;
            assert!(w.get("f1").unwrap() > 0.0 && w.get("f2").unwrap() < 0.0);
            assert_eq!(w.ranked()[0].0, "f1");
            let max = w.weights.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
            assert!(w.get("f3").unwrap().abs() < 0.05 * max, "seed {seed}: {:?}", w.weights);
        }
    }

    #[test]
    fn same_seed_same_vector() {
        let bb = NamedLogistic::new(&[("a", 1.0), ("b", 0.5)], 0.2);
        let st = stats(&["a", "b"]);
        let x = array![0.4, 1.0];
        let one = lime_explain(&bb, x.view(), 0, &st, &cfg(3)).unwrap();
        let two = lime_explain(&bb, x.view(), 0, &st, &cfg(3)).unwrap();
        assert_eq!(one.importance, two.importance);
    }

    #[test]
    fn column_permutation_is_exact() {
        let bb = NamedLogistic::new(&[("a", 1.0), ("b", -0.7), ("c", 2.0)], 0.1);
        let bb_p = NamedLogistic::new(&[("c", 2.0), ("a", 1.0), ("b", -0.7)], 0.1);
        let one = lime_explain(&bb, array![0.2, 0.5, -0.1].view(), 1, &stats(&["a", "b", "c"]), &cfg(9)).unwrap();
        let two = lime_explain(&bb_p, array![-0.1, 0.2, 0.5].view(), 1, &stats(&["c", "a", "b"]), &cfg(9)).unwrap();
        for (name, w) in &one.importance.weights {
            assert_eq!(two.importance.get(name).unwrap(), *w);
        }
    }

    #[test]
    fn fidelity_bounds() {
        let bb = NamedLogistic::new(&[("a", 1.0), ("b", -1.0)], 0.0);
        let st = stats(&["a", "b"]);
        let out = lime_explain(&bb, array![0.0, 0.0].view(), 1, &st, &cfg(1)).unwrap();
        let f = lime_fidelity(&out.local_model, &bb, out.perturbations.view(), &out.weights).unwrap();
        assert!(f >= 0.99, "{f}");

        let x = array![3.0, -3.0];
        let out = lime_explain(&bb, x.view(), 1, &st, &cfg(1)).unwrap();
        let mut wrong = out.local_model.clone();
        wrong.coefficients = vec![0.0, 0.0];
        wrong.intercept = 0.0;
        let f = lime_fidelity(&wrong, &bb, out.perturbations.view(), &out.weights).unwrap();
        let bb_cols = bb.predict_columns(out.perturbations.view());
        assert!(bb_cols.iter().all(|&c| c == 1));
        assert_eq!(f, 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let bb = NamedLogistic::new(&[("a", 1.0)], 0.0);
        let c = LimeConfig {
            n_samples: 5,
            ..LimeConfig::default()
        };
        assert!(matches!(
            lime_explain(&bb, array![0.0].view(), 1, &stats(&["a"]), &c),
            Err(ExplainError::InvalidConfig(_))
        ));
    }
}
