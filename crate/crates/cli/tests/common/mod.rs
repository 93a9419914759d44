//! Thesaurus fixtures built from seeded Gaussian groups.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use hcx_core::clustering::{kmeans, ClusteringConfig};
use hcx_core::data::{normalize, Dataset, Normalization};
use hcx_core::explain::LimeConfig;
use hcx_core::rng::rng_for;
use hcx_core::surrogate::{train_linear, TrainConfig};
use hcx_core::thesaurus::{build_thesaurus, ThesaurusInputs};
use hcx_core::validity::{characterize_clusters, ValidityReport};
use hcx_core::Thesaurus;

/// Group `c` of `k` is shifted by `spread` along the features in `shifts[c]`.
pub struct GroupSpec {
    pub names: Vec<&'static str>,
    pub shifts: Vec<Vec<(usize, f64)>>,
    pub rows: usize,
    pub noise: f64,
}

impl GroupSpec {
    pub fn two_groups() -> Self {
        Self {
            names: vec!["steps", "sleep_minutes", "resting_hr"],
            shifts: vec![vec![], vec![(0, 6.0), (1, 3.0), (2, -1.5)]],
            rows: 60,
            noise: 0.5,
        }
    }

    /// Three groups separated along the same three features in different
    /// proportions; the alphabetically first features carry no signal.
    pub fn three_groups() -> Self {
        Self {
            names: vec!["ambient_light", "bedtime_shift", "sleep_score", "steps", "stress"],
            shifts: vec![
                vec![(2, 2.0), (3, 4.0), (4, 6.0)],
                vec![(2, 4.0), (3, 6.0), (4, 2.0)],
                vec![(2, 6.0), (3, 2.0), (4, 4.0)],
            ],
            rows: 90,
            noise: 0.6,
        }
    }
}

pub fn raw_groups(spec: &GroupSpec, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, "fixture/groups");
    let noise = Normal::new(0.0, spec.noise).expect("valid sd");
    let k = spec.shifts.len();
    let x = Array2::from_shape_fn((spec.rows, spec.names.len()), |(i, j)| {
        let shift: f64 = spec.shifts[i % k].iter().filter(|(f, _)| *f == j).map(|(_, s)| s).sum();
        10.0 * (j + 1) as f64 + shift + noise.sample(&mut rng)
    });
    Dataset::from_matrix(x, &spec.names)
}

/// Normalizes, clusters with k-means, trains the surrogate and explains the
/// first `n_exemplars` rows.
pub fn build(spec: &GroupSpec, n_exemplars: usize, seed: u64, lime_samples: usize) -> (Thesaurus, Dataset) {
    let raw = raw_groups(spec, seed);
    let (ds, stats) = normalize(&raw, Normalization::Zscore);
    let cfg = ClusteringConfig::kmeans(spec.shifts.len(), seed);
    let a = kmeans(ds.values.view(), &cfg).expect("kmeans");
    let validity = ValidityReport::compute(ds.values.view(), &a);
    let profile = characterize_clusters(&raw, &a.labels, 0.05, None).expect("profile");
    let names = ds.feature_names();
    let train = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let model = train_linear(ds.values.view(), &a.labels, &names, &train).expect("surrogate");
    let scores = model.evaluate(ds.values.view(), &a.labels).expect("scores");
    let ids: Vec<String> = (0..n_exemplars).map(|i| ds.row_id(i)).collect();
    let lime = LimeConfig {
        n_samples: lime_samples,
        seed,
        ..LimeConfig::default()
    };
    let glossary: BTreeMap<String, String> = names.iter().map(|n| (n.clone(), n.replace('_', " "))).collect();
    let t = build_thesaurus(ThesaurusInputs {
        dataset: &ds,
        normalization: &stats,
        variant: "daily_full",
        clustering: &cfg,
        labels: &a.labels,
        validity: &validity,
        profile: &profile,
        surrogate: &model,
        surrogate_scores: &scores,
        exemplar_ids: &ids,
        lime: &lime,
        preamble: "Daily summaries from consumer wearables.",
        glossary: &glossary,
        seed,
        created: "1970-01-01T00:00:00Z",
        notes: vec![],
    })
    .expect("thesaurus");
    (t, ds)
}
