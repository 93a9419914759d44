//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{array, Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use hcx_core::clustering::{dbscan, fuzzy_cmeans, jacobi_eigh, kmeans, ClusteringConfig};
use hcx_core::explain::{
    anchor_precision, anchors_explain, counterfactual_search, lime_explain, lime_fidelity, AnchorConfig, Bins,
    Classifier, CounterfactualConfig, FeatureStats, LimeConfig,
};
use hcx_core::llm::{ShotMode, StubBackend, StubMode};
use hcx_core::pipeline::{evaluate_batch, ground_map};
use hcx_core::quality::{ari_readability, summarize};
use hcx_core::surrogate::{loss_and_gradient, train_linear, TrainConfig};
use hcx_core::thesaurus::{load_thesaurus, save_thesaurus};
use hcx_core::validity::{calinski_harabasz, davies_bouldin, dunn, mann_whitney_u, pbm, silhouette, xie_beni, Membership};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::rngs::StdRng::seed_from_u64(seed)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: f64, detail: String) -> Outcome {
    if elapsed.as_secs_f64() < limit_secs {
        Ok(format!("{detail}; {:.2?} < {limit_secs} s", elapsed))
    } else {
        Err(format!("{detail}; took {:.2?}, limit {limit_secs} s", elapsed))
    }
}

fn validity_oracles() -> Outcome {
    let start = Instant::now();
    let x = array![[0.0], [1.0], [10.0], [11.0]];
    let labels = [0, 0, 1, 1];
    let centers = array![[0.5], [10.5]];
    let expected = [
        ("silhouette", ((1.0 - 1.0 / 10.5) + (1.0 - 1.0 / 9.5)) / 2.0),
        ("dbi", 0.1),
        ("chi", 200.0),
        ("dunn", 9.0),
        ("pbm", 2500.0),
        ("xie_beni", 0.0025),
    ];
    let got = [
        silhouette(x.view(), &labels),
        davies_bouldin(x.view(), &labels),
        calinski_harabasz(x.view(), &labels),
        dunn(x.view(), &labels),
        pbm(x.view(), &labels),
        xie_beni(x.view(), Membership::Crisp(&labels), centers.view()),
    ];
    let mut bad = Vec::new();
    for ((name, want), got) in expected.iter().zip(got) {
        match got {
            Ok(v) if (v - want).abs() <= 1e-9 => {}
            other => bad.push(format!("{name}: {other:?} vs {want}")),
        }
    }
    if !bad.is_empty() {
        return Err(bad.join(", "));
    }
    within(start.elapsed(), 1.0, "six indices within 1e-9".into())
}

fn brute_force_inertia(x: ArrayView2<f64>) -> f64 {
    let n = x.nrows();
    let mut best = f64::INFINITY;
    for mask in 1..(1u32 << (n - 1)) {
        let mut total = 0.0;
        for side in [true, false] {
            let rows: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
            let centre: Vec<f64> = (0..x.ncols())
                .map(|j| rows.iter().map(|&i| x[[i, j]]).sum::<f64>() / rows.len() as f64)
                .collect();
            for &i in &rows {
                total += (0..x.ncols()).map(|j| (x[[i, j]] - centre[j]).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
    }
    best
}

/// Checks a labelling against density connectivity: core points in one
/// component of the core graph share a label, other points are noise exactly
/// when no core point reaches them and otherwise carry a reaching core's label.
fn dbscan_matches_closure(x: ArrayView2<f64>, eps: f64, min_samples: usize, labels: &[i32]) -> bool {
    let n = x.nrows();
    let near = |i: usize, j: usize| {
        let d2: f64 = (0..x.ncols()).map(|c| (x[[i, c]] - x[[j, c]]).powi(2)).sum();
        d2 <= eps * eps
    };
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_samples).collect();
    let mut component = vec![usize::MAX; n];
    for s in 0..n {
        if !core[s] || component[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        component[s] = s;
        while let Some(p) = stack.pop() {
            for q in 0..n {
                if core[q] && component[q] == usize::MAX && near(p, q) {
                    component[q] = s;
                    stack.push(q);
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && ((component[i] == component[j]) != (labels[i] == labels[j])) {
                return false;
            }
        }
        if core[i] && labels[i] < 0 {
            return false;
        }
        if !core[i] {
            let reaching: Vec<usize> = (0..n).filter(|&j| core[j] && near(i, j)).collect();
            if reaching.is_empty() != (labels[i] == -1) {
                return false;
            }
            if !reaching.is_empty() && !reaching.iter().any(|&j| labels[j] == labels[i]) {
                return false;
            }
        }
    }
    true
}

fn clustering_oracles() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut km_ok = 0;
    for seed in 0..50 {
        let n = r.random_range(3..=8);
        let x = Array2::from_shape_fn((n, 2), |_| r.random_range(-5.0..5.0));
        let a = kmeans(x.view(), &ClusteringConfig::kmeans(2, seed)).map_err(|e| e.to_string())?;
        let best = brute_force_inertia(x.view());
        if a.inertia.unwrap_or(f64::INFINITY) <= best + 1e-9 * best.max(1.0) {
            km_ok += 1;
        }
    }
    let mut db_ok = 0;
    for _ in 0..100 {
        let n = r.random_range(1..=30);
        let x = Array2::from_shape_fn((n, 2), |_| r.random_range(0.0..10.0));
        let eps = r.random_range(0.5..3.0);
        let min_samples = r.random_range(1..=5);
        let a = dbscan(x.view(), &ClusteringConfig::dbscan(eps, min_samples));
        if dbscan_matches_closure(x.view(), eps, min_samples, &a.labels) {
            db_ok += 1;
        }
    }
    let mut worst_row_sum: f64 = 0.0;
    for seed in 0..20 {
        let n = r.random_range(6..=40);
        let x = Array2::from_shape_fn((n, 3), |_| r.random_range(-3.0..3.0));
        let k = r.random_range(2..=4);
        let f = fuzzy_cmeans(x.view(), &ClusteringConfig::fuzzy_cmeans(k, 2.0, seed)).map_err(|e| e.to_string())?;
        for row in f.membership.rows() {
            worst_row_sum = worst_row_sum.max((row.sum() - 1.0).abs());
        }
    }
    let mut worst_residual: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(2..=12);
        let b = Array2::from_shape_fn((n, n), |_| r.random_range(-1.0..1.0));
        let a = &b + &b.t();
        let e = jacobi_eigh(a.view()).map_err(|e| e.to_string())?;
        for (c, &lambda) in e.values.iter().enumerate() {
            let v = e.vectors.column(c);
            let res = (a.dot(&v) - &v * lambda).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            worst_residual = worst_residual.max(res);
        }
    }
    let detail = format!(
        "k-means optimal {km_ok}/50, DBSCAN closure {db_ok}/100, max |row sum - 1| {worst_row_sum:.1e}, max Jacobi residual {worst_residual:.1e}"
    );
    if km_ok < 50 || db_ok < 100 || worst_row_sum > 1e-9 || worst_residual >= 1e-8 {
        return Err(detail);
    }
    within(start.elapsed(), 30.0, detail)
}

/// Binary logistic black box with known coefficients.
struct Logistic {
    w: Vec<f64>,
    bias: f64,
}

impl Logistic {
    fn p1(&self, x: ArrayView1<f64>) -> f64 {
        let z = self.bias + x.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }
}

impl Classifier for Logistic {
    fn n_features(&self) -> usize {
        self.w.len()
    }

    fn class_labels(&self) -> Vec<i32> {
        vec![0, 1]
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut p = Array2::zeros((x.nrows(), 2));
        for (i, row) in x.rows().into_iter().enumerate() {
            let p1 = self.p1(row);
            p[[i, 0]] = 1.0 - p1;
            p[[i, 1]] = p1;
        }
        p
    }

    fn gradient(&self, x: ArrayView1<f64>, class: usize) -> Option<Vec<f64>> {
        let p1 = self.p1(x);
        let s = if class == 1 { 1.0 } else { -1.0 };
        Some(self.w.iter().map(|w| s * p1 * (1.0 - p1) * w).collect())
    }
}

/// `1{x_feature > 0}` as class 1.
struct Step {
    d: usize,
    feature: usize,
}

impl Classifier for Step {
    fn n_features(&self) -> usize {
        self.d
    }

    fn class_labels(&self) -> Vec<i32> {
        vec![0, 1]
    }

    fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut p = Array2::zeros((x.nrows(), 2));
        for i in 0..x.nrows() {
            p[[i, usize::from(x[[i, self.feature]] > 0.0)]] = 1.0;
        }
        p
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos as f64;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn lime_linear_oracle() -> Outcome {
    let start = Instant::now();
    let coef = vec![3.0, -2.0, 1.0, 0.5];
    let bb = Logistic { w: coef.clone(), bias: 0.0 };
    let names: Vec<String> = (1..=4).map(|j| format!("x{j}")).collect();
    let stats = FeatureStats {
        names: names.clone(),
        mean: vec![0.0; 4],
        sd: vec![1.0; 4],
    };
    let x = array![0.1, -0.2, 0.3, 0.0];
    let abs_coef: Vec<f64> = coef.iter().map(|c: &f64| c.abs()).collect();
    let (mut exact, mut min_fidelity) = (0, f64::INFINITY);
    for seed in 0..20 {
        let cfg = LimeConfig {
            seed,
            ..LimeConfig::default()
        };
        let out = lime_explain(&bb, x.view(), 1, &stats, &cfg).map_err(|e| e.to_string())?;
        let abs_lime: Vec<f64> = names.iter().map(|n| out.importance.get(n).unwrap_or(0.0).abs()).collect();
        if pearson(&ranks(&abs_lime), &ranks(&abs_coef)) == 1.0 {
            exact += 1;
        }
        let f = lime_fidelity(&out.local_model, &bb, out.perturbations.view(), &out.weights).map_err(|e| e.to_string())?;
        min_fidelity = min_fidelity.min(f);
    }
    let detail = format!("Spearman 1.0 in {exact}/20 seeds, min fidelity {min_fidelity:.4}");
    if exact < 19 || min_fidelity < 0.99 {
        return Err(detail);
    }
    within(start.elapsed(), 20.0, detail)
}

fn normal_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut r))
}

fn anchors_precision_and_coverage() -> Outcome {
    let start = Instant::now();
    let data = normal_matrix(4000, 2, 11);
    let names = vec!["x1".to_string(), "x2".to_string()];
    let bins = Bins::quartiles(&names, data.view()).map_err(|e| e.to_string())?;
    let cfg = AnchorConfig::default();
    let step = Step { d: 2, feature: 0 };
    let logistic = Logistic {
        w: vec![2.0, -1.0],
        bias: 0.3,
    };
    let fresh = normal_matrix(100_000, 2, 12);
    let mut worst_precision = f64::INFINITY;
    let mut worst_gap: f64 = 0.0;
    let mut rules = 0;
    for (bb, is_step) in [(&step as &dyn Classifier, true), (&logistic as &dyn Classifier, false)] {
        for (i, x1) in [-1.5, -0.4, 0.2, 0.5, 1.0, 2.0].into_iter().enumerate() {
            let x = array![x1, 0.3 - 0.2 * i as f64];
            let rule = anchors_explain(bb, x.view(), &bins, &cfg).map_err(|e| e.to_string())?;
            let again = anchor_precision(&rule, bb, &bins, rule.target_class, 100_000, 1000 + i as u64)
                .map_err(|e| e.to_string())?;
            worst_precision = worst_precision.min(again);
            rules += 1;
            if is_step {
                let mass = fresh.rows().into_iter().filter(|r| rule.holds(*r)).count() as f64 / fresh.nrows() as f64;
                worst_gap = worst_gap.max((rule.coverage - mass).abs());
            }
        }
    }
    let detail = format!(
        "{rules} rules, min re-estimated precision {worst_precision:.4} (need >= {:.2}), max coverage gap {worst_gap:.4}",
        cfg.precision_threshold - 0.02
    );
    if worst_precision < cfg.precision_threshold - 0.02 || worst_gap > 0.05 {
        return Err(detail);
    }
    within(start.elapsed(), 30.0, detail)
}

fn counterfactual_validity() -> Outcome {
    let spec = common::GroupSpec::three_groups();
    let raw = common::raw_groups(&spec, 5);
    let x = raw.values.clone();
    let labels: Vec<i32> = (0..x.nrows()).map(|i| (i % 3) as i32).collect();
    let model = train_linear(x.view(), &labels, &raw.feature_names(), &TrainConfig::default()).map_err(|e| e.to_string())?;
    let lo: Vec<f64> = x.columns().into_iter().map(|c| c.fold(f64::INFINITY, |a, &v| a.min(v))).collect();
    let hi: Vec<f64> = x.columns().into_iter().map(|c| c.fold(f64::NEG_INFINITY, |a, &v| a.max(v))).collect();
    let (mut found, mut flipped, mut sparsity_ok, mut attempts) = (0, 0, 0, 0);
    for i in 0..30 {
        let row = x.row(i);
        let predicted = model.predict_label_row(row);
        let target = (predicted + 1) % 3;
        attempts += 1;
        let Ok(cf) = counterfactual_search(&model, row, target, &lo, &hi, &CounterfactualConfig::default()) else {
            continue;
        };
        found += 1;
        let z = Array1::from(cf.counterfactual.clone());
        if model.predict_label_row(z.view()) == target {
            flipped += 1;
        }
        let recount = row.iter().zip(&cf.counterfactual).filter(|(a, b)| (*a - *b).abs() > 1e-12).count();
        if recount == cf.sparsity {
            sparsity_ok += 1;
        }
    }
    let detail = format!("{found}/{attempts} found, {flipped} flip to target, sparsity recount agrees on {sparsity_ok}");
    check(found > 0 && flipped == found && sparsity_ok == found, detail)
}

fn surrogate_gradient_and_accuracy() -> Outcome {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (k, d, n) = (3, 4, 15);
        let w = Array2::from_shape_fn((k, d), |_| r.random_range(-1.0..1.0));
        let b = Array1::from_shape_fn(k, |_| r.random_range(-1.0..1.0));
        let x = Array2::from_shape_fn((n, d), |_| r.random_range(-2.0..2.0));
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let l2 = 0.01;
        let (_, gw, gb) = loss_and_gradient(&w, &b, x.view(), &y, l2);
        let h = 1e-6;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for c in 0..k {
            for j in 0..d {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[[c, j]] += h;
                wm[[c, j]] -= h;
                let fd = (loss_and_gradient(&wp, &b, x.view(), &y, l2).0 - loss_and_gradient(&wm, &b, x.view(), &y, l2).0) / (2.0 * h);
                analytic.push(gw[[c, j]]);
                numeric.push(fd);
            }
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[c] += h;
            bm[c] -= h;
            let fd = (loss_and_gradient(&w, &bp, x.view(), &y, l2).0 - loss_and_gradient(&w, &bm, x.view(), &y, l2).0) / (2.0 * h);
            analytic.push(gb[c]);
            numeric.push(fd);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&analytic).max(norm(&numeric)));
    }

    let spec = common::GroupSpec {
        rows: 400,
        ..common::GroupSpec::two_groups()
    };
    let raw = common::raw_groups(&spec, 8);
    let (ds, _) = hcx_core::data::normalize(&raw, hcx_core::data::Normalization::Zscore);
    let a = kmeans(ds.values.view(), &ClusteringConfig::kmeans(2, 8)).map_err(|e| e.to_string())?;
    let train: Vec<usize> = (0..ds.n_rows()).filter(|i| i % 5 != 0).collect();
    let test: Vec<usize> = (0..ds.n_rows()).filter(|i| i % 5 == 0).collect();
    let pick = |rows: &[usize]| (ds.values.select(ndarray::Axis(0), rows), rows.iter().map(|&i| a.labels[i]).collect::<Vec<_>>());
    let (xt, yt) = pick(&train);
    let (xe, ye) = pick(&test);
    let model = train_linear(xt.view(), &yt, &ds.feature_names(), &TrainConfig::default()).map_err(|e| e.to_string())?;
    let scores = model.evaluate(xe.view(), &ye).map_err(|e| e.to_string())?;
    let detail = format!(
        "max relative gradient error {worst:.1e}; hold-out accuracy {:.4}, macro-F1 {:.4}",
        scores.accuracy, scores.macro_f1
    );
    check(worst <= 1e-5 && scores.accuracy >= 0.99 && scores.macro_f1 >= 0.99, detail)
}

/// Two-sided exact p by enumerating every split of the pooled sample and
/// counting pairwise wins.
fn permutation_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n1, n) = (a.len(), pooled.len());
    let u_of = |mask: u32| -> f64 {
        let mut u = 0.0;
        for i in (0..n).filter(|&i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|&j| mask >> j & 1 == 0) {
                u += if pooled[i] > pooled[j] {
                    1.0
                } else if pooled[i] == pooled[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        u
    };
    let mu = (n1 * (n - n1)) as f64 / 2.0;
    let observed = (u_of((1u32 << n1) - 1) - mu).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        if (u_of(mask) - mu).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn mann_whitney_oracles() -> Outcome {
    let mut r = rng(7);
    let (mut pairs, mut worst): (usize, f64) = (0, 0.0);
    for n1 in 1..12 {
        for n2 in 1..=(12 - n1) {
            for _ in 0..2 {
                let a: Vec<f64> = (0..n1).map(|_| r.random_range(0..6) as f64).collect();
                let b: Vec<f64> = (0..n2).map(|_| r.random_range(0..6) as f64).collect();
                let mw = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                if !mw.exact {
                    return Err(format!("sizes ({n1}, {n2}) did not use the exact distribution"));
                }
                worst = worst.max((mw.p_two_sided - permutation_p(&a, &b)).abs());
                pairs += 1;
            }
        }
    }
    let mut sum_ok = 0;
    for _ in 0..1000 {
        let n1 = r.random_range(1..40);
        let n2 = r.random_range(1..40);
        let a: Vec<f64> = (0..n1).map(|_| (r.random_range(0.0..5.0f64) * 2.0).round()).collect();
        let b: Vec<f64> = (0..n2).map(|_| (r.random_range(0.0..5.0f64) * 2.0).round()).collect();
        let ab = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?.u;
        let ba = mann_whitney_u(&b, &a).map_err(|e| e.to_string())?.u;
        if ab + ba == (n1 * n2) as f64 {
            sum_ok += 1;
        }
    }
    let detail = format!("{pairs} exact cases, max |p - oracle| {worst:.1e}; U(a,b)+U(b,a)=|a||b| on {sum_ok}/1000");
    check(worst <= f64::EPSILON && sum_ok == 1000, detail)
}

fn content_identities() -> Outcome {
    let start = Instant::now();
    let (t, ds) = common::build(&common::GroupSpec::two_groups(), 20, 3, 2000);
    let ids: Vec<String> = t.exemplars.iter().map(|e| e.instance_id.clone()).collect();
    let truth = ground_map(&t, &ds, &ids).map_err(|e| e.to_string())?;
    let echo = StubBackend::new("echo-stub", StubMode::Echo(truth.clone()));
    let reversed = StubBackend::new("reversed-stub", StubMode::Reversed(truth));
    let modes = [ShotMode::Zero, ShotMode::One, ShotMode::few()];
    let reports = evaluate_batch(&t, &ds, &ids, &modes, &[&echo, &reversed], 3, 4).map_err(|e| e.to_string())?;
    let mean = |model: &str, f: &dyn Fn(&hcx_core::QualityReport) -> f64| {
        let v: Vec<f64> = reports.iter().filter(|r| r.provenance.model == model).map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let echo_spearman = mean("echo-stub", &|r| r.content.spearman);
    let echo_ndcg = mean("echo-stub", &|r| r.content.ndcg_difference);
    let echo_euclid = reports
        .iter()
        .filter(|r| r.provenance.model == "echo-stub")
        .map(|r| r.content.euclidean)
        .fold(0.0f64, f64::max);
    let reversed_spearman = mean("reversed-stub", &|r| r.content.spearman);
    let detail = format!(
        "echo: Spearman {echo_spearman}, NDCG diff {echo_ndcg}, max Euclidean {echo_euclid:.1e}; reversed: Spearman {reversed_spearman}"
    );
    if echo_spearman != 1.0 || echo_ndcg != 0.0 || echo_euclid > 1e-9 || (reversed_spearman + 1.0).abs() > 1e-12 {
        return Err(detail);
    }
    within(start.elapsed(), 10.0, detail)
}

fn shot_mode_trend() -> Outcome {
    let modes = [ShotMode::Zero, ShotMode::One, ShotMode::few()];
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=3 {
        let (t, ds) = common::build(&common::GroupSpec::three_groups(), 20, seed, 2000);
        let ids: Vec<String> = t.exemplars.iter().map(|e| e.instance_id.clone()).collect();
        let copy = StubBackend::new("shot-copy", StubMode::ShotCopy(t.feature_names()));
        let fixed = StubBackend::new("alphabetical", StubMode::Alphabetical(t.feature_names()));
        let reports = evaluate_batch(&t, &ds, &ids, &modes, &[&copy, &fixed], seed, 4).map_err(|e| e.to_string())?;
        let summary = summarize(&reports);
        let series = |model: &str| -> Vec<f64> {
            modes
                .iter()
                .map(|m| {
                    summary
                        .iter()
                        .find(|s| s.model == model && s.technique == m.technique())
                        .map_or(f64::NAN, |s| s.spearman())
                })
                .collect()
        };
        let (c, f) = (series("shot-copy"), series("alphabetical"));
        ok &= c[0] < c[1] && c[1] < c[2] && f[0] == f[1] && f[1] == f[2] && c[2] > f[2];
        lines.push(format!("seed {seed}: copy {:.3} < {:.3} < {:.3}, fixed {:.3}", c[0], c[1], c[2], f[0]));
    }
    check(ok, lines.join("; "))
}

fn ari_fixtures() -> Outcome {
    let ari = |chars: f64, words: f64, sentences: f64| 4.71 * chars / words + 0.5 * words / sentences - 21.43;
    let fixtures = [
        ("The cat sat.", 9.0, 3.0, 1.0),
        ("Sleep well. Walk more!", 17.0, 4.0, 2.0),
        ("Steps rose by 20 percent?", 20.0, 5.0, 1.0),
        ("A b c d e f.", 6.0, 6.0, 1.0),
        ("Resting heart rate dropped, and stress fell. Mood improved... Good.", 52.0, 10.0, 3.0),
    ];
    let mut worst: f64 = 0.0;
    for (text, c, w, s) in fixtures {
        let got = ari_readability(text).map_err(|e| e.to_string())?;
        worst = worst.max((got - ari(c, w, s)).abs());
    }
    let cat = ari_readability("The cat sat.").map_err(|e| e.to_string())?;
    let detail = format!("max deviation {worst:.1e}; \"The cat sat.\" = {cat:.2}");
    check(worst <= 1e-9 && (cat - (-5.80)).abs() <= 1e-9, detail)
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let key = path.strip_prefix(root).expect("under root").display().to_string();
                out.insert(key, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn end_to_end_demo() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let start = Instant::now();
        let result = Command::new(env!("CARGO_BIN_EXE_hcx"))
            .args(["demo", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        if !result.status.success() {
            return Err(format!("exit {:?}: {}", result.status.code(), String::from_utf8_lossy(&result.stderr)));
        }
        runs.push((elapsed, String::from_utf8_lossy(&result.stdout).to_string(), tree_bytes(&out)));
    }
    let stdout = &runs[0].1;
    let after: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("silhouette before/after IQR: "))
        .and_then(|l| l.split(" / ").nth(1))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(f64::NAN);
    let expected_files = [
        "benchmark/benchmark.csv",
        "thesaurus.json",
        "explain/explanation.json",
        "quality/quality_instances.csv",
        "quality/quality_summary.csv",
    ];
    let missing: Vec<&str> = expected_files.iter().copied().filter(|f| !runs[0].2.contains_key(*f)).collect();
    let rows = runs[0].2.get("benchmark/benchmark.csv").map_or(0, |b| b.iter().filter(|&&c| c == b'\n').count() - 1);
    let identical = runs[0].2 == runs[1].2;
    let slowest = runs.iter().map(|r| r.0).max().unwrap_or_default();
    let detail = format!(
        "{} files, {rows} benchmark rows, silhouette after IQR {after:.4}, identical re-run: {identical}",
        runs[0].2.len()
    );
    if !missing.is_empty() || rows != 24 || !(after >= 0.5) || !identical || !stdout.contains("exemplars: 20") {
        return Err(format!("{detail}; missing {missing:?}"));
    }
    within(slowest, 60.0, detail)
}

fn serialization_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng(12);
    let (mut equal, mut flips, mut detected) = (0, 0, 0);
    for i in 0..50u64 {
        let spec = if i % 2 == 0 {
            common::GroupSpec::two_groups()
        } else {
            common::GroupSpec::three_groups()
        };
        let n_exemplars = r.random_range(1..=20);
        let (t, _) = common::build(&spec, n_exemplars, 100 + i, r.random_range(60..400));
        let path = dir.path().join(format!("t{i}.json"));
        save_thesaurus(&t, &path).map_err(|e| e.to_string())?;
        if load_thesaurus(&path).map_err(|e| e.to_string())? == t {
            equal += 1;
        }
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let mut corrupt = bytes.clone();
            let at = r.random_range(0..corrupt.len());
            corrupt[at] ^= r.random_range(1..=255u8);
            let bad = dir.path().join("corrupt.json");
            std::fs::write(&bad, &corrupt).map_err(|e| e.to_string())?;
            flips += 1;
            if load_thesaurus(&bad).is_err() {
                detected += 1;
            }
        }
    }
    let detail = format!("{equal}/50 round-trips equal; {detected}/{flips} corrupted files rejected");
    check(equal == 50 && detected == flips, detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("validity-index oracles", validity_oracles),
        ("clustering oracles", clustering_oracles),
        ("LIME linear oracle", lime_linear_oracle),
        ("anchors precision and coverage", anchors_precision_and_coverage),
        ("counterfactual validity and sparsity", counterfactual_validity),
        ("surrogate gradient and accuracy", surrogate_gradient_and_accuracy),
        ("Mann-Whitney exact p and U symmetry", mann_whitney_oracles),
        ("content-metric identities", content_identities),
        ("shot-mode trend", shot_mode_trend),
        ("ARI fixtures", ari_fixtures),
        ("end-to-end demo", end_to_end_demo),
        ("thesaurus serialization", serialization_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
