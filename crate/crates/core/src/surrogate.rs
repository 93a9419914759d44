//! Multinomial logistic regression used as the classifier behind the
//! explainers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("expected {expected} features, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    RowMismatch { rows: usize, labels: usize },
}

pub type Result<T> = std::result::Result<T, SurrogateError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Training stops once an epoch lowers the loss by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            lr: 0.1,
            epochs: 2000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub epochs: usize,
    pub final_loss: f64,
    pub seed: u64,
    pub l2: f64,
    pub final_lr: f64,
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSurrogate {
    pub feature_names: Vec<String>,
    /// Cluster id of each weight row, ascending.
    pub classes: Vec<i32>,
    /// `k × d`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub training: TrainingInfo,
}

fn softmax_inplace(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

fn probabilities(w: &Array2<f64>, b: &Array1<f64>, x: ArrayView2<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    z += b;
    for mut row in z.rows_mut() {
        softmax_inplace(row.as_slice_mut().expect("contiguous"));
    }
    z
}

/// Mean cross-entropy plus `(l2/2)·‖W‖²` and its gradient with respect to the
/// weights and the (unregularized) bias. `y` holds class row indices.
pub fn loss_and_gradient(
    w: &Array2<f64>,
    b: &Array1<f64>,
    x: ArrayView2<f64>,
    y: &[usize],
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut p = probabilities(w, b, x);
    let mut loss = 0.0;
    for (i, &c) in y.iter().enumerate() {
        loss -= p[[i, c]].max(1e-300).ln();
        p[[i, c]] -= 1.0;
    }
    loss = loss / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    let gw = p.t().dot(&x) / n + &(w * l2);
    let gb = p.sum_axis(Axis(0)) / n;
    (loss, gw, gb)
}

/// Full-batch gradient descent. A step that would raise the loss is retried
/// with half the learning rate, so the loss trace never increases.
pub fn train_linear(x: ArrayView2<f64>, labels: &[i32], feature_names: &[String], cfg: &TrainConfig) -> Result<LinearSurrogate> {
    if labels.len() != x.nrows() {
        return Err(SurrogateError::RowMismatch {
            rows: x.nrows(),
            labels: labels.len(),
        });
    }
    if feature_names.len() != x.ncols() {
        return Err(SurrogateError::ShapeMismatch {
            expected: feature_names.len(),
            found: x.ncols(),
        });
    }
    let mut classes: Vec<i32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(SurrogateError::SingleClass);
    }
    let y: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).expect("present")).collect();
    let (k, d) = (classes.len(), x.ncols());

    let mut rng = rng_for(cfg.seed, "surrogate/init");
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w = Array2::from_shape_fn((k, d), |_| init.sample(&mut rng));
    let mut b = Array1::zeros(k);
    let mut lr = cfg.lr;
    let (mut loss, mut gw, mut gb) = loss_and_gradient(&w, &b, x, &y, cfg.l2);
    let mut trace = vec![loss];
    let mut epochs = 0;
    while epochs < cfg.epochs {
        epochs += 1;
        let mut accepted = None;
        for _ in 0..40 {
            let w_new = &w - &(&gw * lr);
            let b_new = &b - &(&gb * lr);
            let next = loss_and_gradient(&w_new, &b_new, x, &y, cfg.l2);
            if next.0 <= loss {
                accepted = Some((w_new, b_new, next));
                break;
            }
            lr *= 0.5;
        }
        let Some((w_new, b_new, (new_loss, new_gw, new_gb))) = accepted else {
            break;
        };
        let delta = loss - new_loss;
        w = w_new;
        b = b_new;
        loss = new_loss;
        gw = new_gw;
        gb = new_gb;
        trace.push(loss);
        if delta < cfg.tol {
            break;
        }
    }
    log::debug!("surrogate trained: {epochs} epochs, loss {loss:.6}");
    Ok(LinearSurrogate {
        feature_names: feature_names.to_vec(),
        classes,
        weights: w,
        bias: b,
        training: TrainingInfo {
            epochs,
            final_loss: loss,
            seed: cfg.seed,
            l2: cfg.l2,
            final_lr: lr,
            loss_trace: trace,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<(i32, f64)>,
    /// Classes absent from both the truth and the predictions (F1 counted as 0).
    pub absent_classes: Vec<i32>,
}

/// Accuracy and macro F1 over `classes`.
pub fn classification_scores(y: &[i32], y_hat: &[i32], classes: &[i32]) -> Result<Evaluation> {
    if y.len() != y_hat.len() {
        return Err(SurrogateError::RowMismatch {
            rows: y.len(),
            labels: y_hat.len(),
        });
    }
    let correct = y.iter().zip(y_hat).filter(|(a, b)| a == b).count();
    let accuracy = if y.is_empty() { 0.0 } else { correct as f64 / y.len() as f64 };
    let mut per_class_f1 = Vec::with_capacity(classes.len());
    let mut absent_classes = Vec::new();
    for &c in classes {
        let tp = y.iter().zip(y_hat).filter(|(a, b)| **a == c && **b == c).count() as f64;
        let fp = y.iter().zip(y_hat).filter(|(a, b)| **a != c && **b == c).count() as f64;
        let fn_ = y.iter().zip(y_hat).filter(|(a, b)| **a == c && **b != c).count() as f64;
        if tp + fp + fn_ == 0.0 {
            absent_classes.push(c);
        }
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        per_class_f1.push((c, f1));
    }
    let macro_f1 = if classes.is_empty() {
        0.0
    } else {
        per_class_f1.iter().map(|p| p.1).sum::<f64>() / classes.len() as f64
    };
    Ok(Evaluation {
        accuracy,
        macro_f1,
        per_class_f1,
        absent_classes,
    })
}

impl LinearSurrogate {
    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    fn check(&self, d: usize) -> Result<()> {
        if d != self.n_features() {
            return Err(SurrogateError::ShapeMismatch {
                expected: self.n_features(),
                found: d,
            });
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x.ncols())?;
        Ok(probabilities(&self.weights, &self.bias, x))
    }

    pub fn predict_proba_row(&self, x: ArrayView1<f64>) -> Result<Vec<f64>> {
        self.check(x.len())?;
        let mut z: Vec<f64> = (0..self.classes.len()).map(|c| self.weights.row(c).dot(&x) + self.bias[c]).collect();
        softmax_inplace(&mut z);
        Ok(z)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<i32>> {
        let p = self.predict_proba(x)?;
        Ok(p.rows()
            .into_iter()
            .map(|r| {
                let best = r
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
                self.classes[best.0]
            })
            .collect())
    }

    pub fn class_index(&self, class: i32) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }

    pub fn evaluate(&self, x: ArrayView2<f64>, y: &[i32]) -> Result<Evaluation> {
        if y.len() != x.nrows() {
            return Err(SurrogateError::RowMismatch {
                rows: x.nrows(),
                labels: y.len(),
            });
        }
        let y_hat = self.predict(x)?;
        classification_scores(y, &y_hat, &self.classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    fn blobs() -> (Array2<f64>, Vec<i32>) {
        let mut rng = rng_for(1, "surrogate-test");
        let noise = Normal::new(0.0, 0.5).unwrap();
        let x = Array2::from_shape_fn((60, 2), |(i, _)| if i < 30 { -3.0 } else { 3.0 } + noise.sample(&mut rng));
        let y = (0..60).map(|i| i32::from(i >= 30)).collect();
        (x, y)
    }

    #[test]
    fn separable_blobs_train_perfectly() {
        let (x, y) = blobs();
        let m = train_linear(x.view(), &y, &names(2), &TrainConfig::default()).unwrap();
        let e = m.evaluate(x.view(), &y).unwrap();
        assert_eq!((e.accuracy, e.macro_f1), (1.0, 1.0));
        for w in m.training.loss_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[0.0], [1.0]];
        assert_eq!(
            train_linear(x.view(), &[3, 3], &names(1), &TrainConfig::default()),
            Err(SurrogateError::SingleClass)
        );
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LinearSurrogate {
            feature_names: names(2),
            classes: vec![0, 1, 2],
            weights: Array2::zeros((3, 2)),
            bias: Array1::zeros(3),
            training: TrainingInfo {
                epochs: 0,
                final_loss: 0.0,
                seed: 0,
                l2: 0.0,
                final_lr: 0.0,
                loss_trace: vec![],
            },
        };
        let p = m.predict_proba(array![[1.0, 2.0], [-4.0, 0.5]].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(m.predict_proba(array![[1.0]].view()), Err(SurrogateError::ShapeMismatch { .. })));
    }

    #[test]
    fn scores_worked_example() {
        let e = classification_scores(&[0, 0, 1, 1], &[0, 1, 1, 1], &[0, 1]).unwrap();
        assert_eq!(e.accuracy, 0.75);
        assert!((e.per_class_f1[0].1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((e.per_class_f1[1].1 - 0.8).abs() < 1e-12);
        assert!((e.macro_f1 - 11.0 / 15.0).abs() < 1e-12);
        let c = classification_scores(&[0, 0, 1, 1], &[1, 1, 0, 0], &[0, 1]).unwrap();
        assert_eq!((c.accuracy, c.macro_f1), (0.0, 0.0));
        let a = classification_scores(&[0, 1], &[0, 1], &[0, 1, 2]).unwrap();
        assert_eq!(a.absent_classes, vec![2]);
    }
}
