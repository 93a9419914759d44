use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ExplainError, Result};
use crate::data::quantile_sorted;
use crate::rng::rng_for;

/// Training-data quartile bins per feature, with the observed values of each
/// bin kept for conditional resampling.
#[derive(Debug, Clone)]
pub struct Bins {
    pub names: Vec<String>,
    /// `(q1, median, q3)` per feature.
    pub edges: Vec<[f64; 3]>,
    values: Vec<[Vec<f64>; 4]>,
    data: Array2<f64>,
}

impl Bins {
    pub fn quartiles(names: &[String], x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(ExplainError::EmptyData);
        }
        if names.len() != x.ncols() {
            return Err(ExplainError::ShapeMismatch {
                expected: names.len(),
                found: x.ncols(),
            });
        }
        let mut edges = Vec::with_capacity(x.ncols());
        let mut values = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let mut col = x.column(j).to_vec();
            col.sort_by(f64::total_cmp);
            let e = [
                quantile_sorted(&col, 0.25),
                quantile_sorted(&col, 0.5),
                quantile_sorted(&col, 0.75),
            ];
            let mut v: [Vec<f64>; 4] = Default::default();
            for &c in x.column(j) {
                v[bin_index(&e, c)].push(c);
            }
            edges.push(e);
            values.push(v);
        }
        Ok(Self {
            names: names.to_vec(),
            edges,
            values,
            data: x.to_owned(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn bin_of(&self, feature: usize, v: f64) -> usize {
        bin_index(&self.edges[feature], v)
    }

    /// The predicate "feature lies in the bin containing `v`".
    pub fn predicate_for(&self, feature: usize, v: f64) -> Predicate {
        let e = &self.edges[feature];
        let bin = self.bin_of(feature, v);
        let (relation, low, high) = match bin {
            0 => (Relation::Le, None, Some(e[0])),
            3 => (Relation::Gt, Some(e[2]), None),
            b => (Relation::InBin, Some(e[b - 1]), Some(e[b])),
        };
        Predicate {
            feature: self.names[feature].clone(),
            index: feature,
            relation,
            low,
            high,
            bin,
        }
    }
}

fn bin_index(e: &[f64; 3], v: f64) -> usize {
    e.iter().filter(|&&edge| v > edge).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Gt,
    InBin,
}

/// `feature ≤ high`, `feature > low`, or `low < feature ≤ high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: String,
    pub index: usize,
    pub relation: Relation,
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub bin: usize,
}

impl Predicate {
    pub fn holds(&self, v: f64) -> bool {
        self.low.is_none_or(|l| v > l) && self.high.is_none_or(|h| v <= h)
    }

    pub fn describe(&self) -> String {
        match (self.low, self.high) {
            (None, Some(h)) => format!("{} <= {h:.4}", self.feature),
            (Some(l), None) => format!("{} > {l:.4}", self.feature),
            (Some(l), Some(h)) => format!("{l:.4} < {} <= {h:.4}", self.feature),
            (None, None) => format!("{} is any", self.feature),
        }
    }

    /// Maps the thresholds through `f` (e.g. back to original units).
    pub fn map_thresholds(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            low: self.low.map(&f),
            high: self.high.map(&f),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRule {
    pub predicates: Vec<Predicate>,
    pub target_class: i32,
    pub precision: f64,
    pub coverage: f64,
    pub n_samples: usize,
    pub precision_threshold: f64,
    /// Set when even the full conjunction misses the precision threshold.
    pub no_rule_found: bool,
}

impl AnchorRule {
    pub fn empty(target_class: i32) -> Self {
        Self {
            predicates: Vec::new(),
            target_class,
            precision: 0.0,
            coverage: 1.0,
            n_samples: 0,
            precision_threshold: 0.0,
            no_rule_found: false,
        }
    }

    pub fn holds(&self, row: ArrayView1<f64>) -> bool {
        self.predicates.iter().all(|p| p.holds(row[p.index]))
    }

    pub fn describe(&self) -> String {
        if self.predicates.is_empty() {
            return "always".into();
        }
        self.predicates.iter().map(Predicate::describe).collect::<Vec<_>>().join(" AND ")
    }

    fn key(&self) -> String {
        let mut names: Vec<&str> = self.predicates.iter().map(|p| p.feature.as_str()).collect();
        names.sort_unstable();
        names.join("&")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub precision_threshold: f64,
    pub n_mc: usize,
    pub beam: usize,
    pub seed: u64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            precision_threshold: 0.95,
            n_mc: 10_000,
            beam: 4,
            seed: 0,
        }
    }
}

/// Fraction of `data` rows satisfying the rule.
pub fn anchor_coverage(rule: &AnchorRule, data: ArrayView2<f64>) -> Result<f64> {
    if data.nrows() == 0 {
        return Err(ExplainError::EmptyData);
    }
    let hits = data.rows().into_iter().filter(|r| rule.holds(*r)).count();
    Ok(hits as f64 / data.nrows() as f64)
}

/// Monte Carlo precision: background rows drawn from the training data with
/// every anchored feature resampled from the training values of its bin.
pub fn anchor_precision(rule: &AnchorRule, clf: &dyn Classifier, bins: &Bins, x_class: i32, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc == 0 {
        return Err(ExplainError::EmptySample);
    }
    let col = clf.class_column(x_class).ok_or(ExplainError::UnknownClass(x_class))?;
    let mut rng = rng_for(seed, &format!("anchors/{}", rule.key()));
    let n = bins.data.nrows();
    let mut z = Array2::zeros((n_mc, bins.n_features()));
    for i in 0..n_mc {
        let r = rng.random_range(0..n);
        z.row_mut(i).assign(&bins.data.row(r));
        for p in &rule.predicates {
            let pool = &bins.values[p.index][p.bin];
            if !pool.is_empty() && !p.holds(z[[i, p.index]]) {
                z[[i, p.index]] = pool[rng.random_range(0..pool.len())];
            } else if pool.is_empty() {
                z[[i, p.index]] = p.low.or(p.high).unwrap_or(0.0);
            }
        }
    }
    let hits = clf.predict_columns(z.view()).into_iter().filter(|&c| c == col).count();
    Ok(hits as f64 / n_mc as f64)
}

/// Beam search over bin predicates of `x`. Among candidates of the smallest
/// size that reach the precision threshold, the one with the highest coverage
/// wins.
pub fn anchors_explain(clf: &dyn Classifier, x: ArrayView1<f64>, bins: &Bins, cfg: &AnchorConfig) -> Result<AnchorRule> {
    let d = bins.n_features();
    if x.len() != d || clf.n_features() != d {
        return Err(ExplainError::ShapeMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if cfg.beam == 0 {
        return Err(ExplainError::InvalidConfig("beam must be >= 1".into()));
    }
    let target = clf.predict_label_row(x);
    let evaluate = |features: &BTreeSet<usize>| -> Result<AnchorRule> {
        let mut rule = AnchorRule::empty(target);
        rule.predicates = features.iter().map(|&j| bins.predicate_for(j, x[j])).collect();
        rule.precision = anchor_precision(&rule, clf, bins, target, cfg.n_mc, cfg.seed)?;
        rule.coverage = anchor_coverage(&rule, bins.data.view())?;
        rule.n_samples = cfg.n_mc;
        rule.precision_threshold = cfg.precision_threshold;
        Ok(rule)
    };
    let better = |a: &AnchorRule, b: &AnchorRule| {
        a.coverage
            .total_cmp(&b.coverage)
            .then(a.precision.total_cmp(&b.precision))
            .then_with(|| b.key().cmp(&a.key()))
    };

    let empty = evaluate(&BTreeSet::new())?;
    if empty.precision >= cfg.precision_threshold {
        return Ok(empty);
    }
    let mut beam: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
    let mut last = empty;
    for _size in 1..=d {
        let mut seen = BTreeSet::new();
        for rule in &beam {
            for j in 0..d {
                if !rule.contains(&j) {
                    let mut next = rule.clone();
                    next.insert(j);
                    seen.insert(next);
                }
            }
        }
        let mut scored: Vec<(BTreeSet<usize>, AnchorRule)> =
            seen.into_iter().map(|s| evaluate(&s).map(|r| (s, r))).collect::<Result<_>>()?;
        if let Some(best) = scored
            .iter()
            .filter(|(_, r)| r.precision >= cfg.precision_threshold)
            .max_by(|a, b| better(&a.1, &b.1))
        {
            return Ok(best.1.clone());
        }
        scored.sort_by(|a, b| {
            b.1.precision
                .total_cmp(&a.1.precision)
                .then(b.1.coverage.total_cmp(&a.1.coverage))
                .then_with(|| a.1.key().cmp(&b.1.key()))
        });
        last = scored[0].1.clone();
        beam = scored.into_iter().take(cfg.beam).map(|s| s.0).collect();
    }
    last.no_rule_found = true;
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::super::testing::{Constant, Step};
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_data(n: usize, d: usize, seed: u64) -> (Vec<String>, Array2<f64>) {
        let mut rng = rng_for(seed, "anchor-data");
        let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
        ((0..d).map(|j| format!("x{}", j + 1)).collect(), x)
    }

    #[test]
    fn threshold_box_anchors_one_feature() {
        let (names, data) = normal_data(4000, 2, 1);
        let bins = Bins::quartiles(&names, data.view()).unwrap();
        let bb = Step {
            d: 2,
            feature: 0,
            threshold: 0.0,
        };
        let x = ndarray::array![1.0, 0.3];
        let rule = anchors_explain(&bb, x.view(), &bins, &AnchorConfig::default()).unwrap();
        assert_eq!(rule.predicates.len(), 1);
        assert_eq!(rule.predicates[0].feature, "x1");
        assert!(rule.precision >= 0.95);
        assert!((rule.coverage - 0.25).abs() <= 0.05, "{}", rule.coverage);
        assert!(!rule.no_rule_found);
        let again = anchor_precision(&rule, &bb, &bins, 1, 100_000, 77).unwrap();
        assert!(again >= 0.93);
    }

    #[test]
    fn constant_model_gives_empty_rule() {
        let (names, data) = normal_data(500, 3, 2);
        let bins = Bins::quartiles(&names, data.view()).unwrap();
        let rule = anchors_explain(&Constant(3), data.row(0), &bins, &AnchorConfig::default()).unwrap();
        assert!(rule.predicates.is_empty());
        assert_eq!((rule.precision, rule.coverage), (1.0, 1.0));
    }

    #[test]
    fn median_rule_covers_half() {
        let (names, data) = normal_data(5000, 1, 3);
        let bins = Bins::quartiles(&names, data.view()).unwrap();
        let mut rule = AnchorRule::empty(0);
        rule.predicates.push(Predicate {
            feature: "x1".into(),
            index: 0,
            relation: Relation::Le,
            low: None,
            high: Some(bins.edges[0][1]),
            bin: 1,
        });
        let c = anchor_coverage(&rule, data.view()).unwrap();
        assert!((c - 0.5).abs() <= 0.02);
        assert_eq!(anchor_coverage(&AnchorRule::empty(0), data.view()).unwrap(), 1.0);
    }

    #[test]
    fn empty_rule_precision_is_base_rate() {
        let (names, data) = normal_data(2000, 2, 4);
        let bins = Bins::quartiles(&names, data.view()).unwrap();
        let bb = Step {
            d: 2,
            feature: 1,
            threshold: 0.0,
        };
        let p = anchor_precision(&AnchorRule::empty(1), &bb, &bins, 1, 20_000, 5).unwrap();
        let base = data.column(1).iter().filter(|&&v| v > 0.0).count() as f64 / 2000.0;
        assert!((p - base).abs() < 0.02);
        assert!(matches!(
            anchor_coverage(&AnchorRule::empty(1), Array2::<f64>::zeros((0, 2)).view()),
            Err(ExplainError::EmptyData)
        ));
    }
}
