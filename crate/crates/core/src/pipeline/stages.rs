use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::artifacts::{write_dataset, write_json, write_preprocessed};
use super::demo::{demo_config, generate_demo_csv, DemoShape, DEMO_CONFIG, DEMO_PREAMBLE};
use super::{PipelineError, Result};
use crate::clustering::{run, Assignment, ClusteringAlgorithm, ClusteringConfig};
use crate::data::{
    load_csv, make_variants, preprocess, remove_outliers_iqr, Dataset, LoadReport, NormalizationStats, OutlierReport,
    PipelineConfig, TargetGranularity,
};
use crate::explain::{lime_explain, FeatureImportanceVector, FeatureStats, LimeConfig};
use crate::llm::{
    build_prompt, complete_batch, parse_response, ranking_of, Completion, LlmBackend, ParsedExplanation,
    PromptBundle, ShotMode, Sign, StubBackend, StubMode,
};
use crate::quality::{evaluate_quality, summarize, write_reports_csv, write_summary_csv, Provenance, QualityReport};
use crate::rng::{derive_seed, rng_for};
use crate::surrogate::{train_linear, TrainConfig};
use crate::thesaurus::{
    build_thesaurus, run_benchmark, save_thesaurus, select_best, BenchmarkConfig, Criterion, Selection, Thesaurus,
    ThesaurusInputs,
};
use crate::validity::{characterize_clusters, ClusterProfile, ValidityReport};

/// Preprocessed variants plus the per-granularity validation data and
/// normalization statistics.
#[derive(Debug, Clone)]
pub struct PreprocessOutput {
    pub load_report: LoadReport,
    pub variants: BTreeMap<String, Dataset>,
    pub variant_granularity: BTreeMap<String, TargetGranularity>,
    pub validation: BTreeMap<TargetGranularity, Dataset>,
    pub stats: BTreeMap<TargetGranularity, NormalizationStats>,
}

pub fn run_preprocess(cfg: &PipelineConfig, data: &Path) -> Result<PreprocessOutput> {
    let schema = cfg.schema()?;
    let spec = cfg.preprocess_spec()?;
    let specs = cfg.variant_specs()?;
    if specs.is_empty() {
        return Err(PipelineError::Config("the pipeline config lists no variants".into()));
    }
    let raw = load_csv(data, &schema)?;
    let mut granularities: Vec<TargetGranularity> = specs.iter().map(|v| v.granularity).collect();
    granularities.sort();
    granularities.dedup();
    let mut training = BTreeMap::new();
    let mut validation = BTreeMap::new();
    let mut stats = BTreeMap::new();
    for g in granularities {
        let p = preprocess(&raw, &schema, &spec, g)?;
        training.insert(g, p.training);
        validation.insert(g, p.validation);
        stats.insert(g, p.stats);
    }
    let variants = make_variants(&training, &specs)?;
    let variant_granularity = specs.iter().map(|s| (s.key(), s.granularity)).collect();
    Ok(PreprocessOutput {
        load_report: raw.report,
        variants,
        variant_granularity,
        validation,
        stats,
    })
}

/// The winning configuration re-run after IQR outlier removal.
#[derive(Debug, Clone)]
pub struct Refined {
    pub variant: String,
    pub config: ClusteringConfig,
    /// Training rows that survived the outlier rule, normalized.
    pub dataset: Dataset,
    /// Validation rows aligned with `dataset`, original units.
    pub validation: Dataset,
    pub stats: NormalizationStats,
    pub assignment: Assignment,
    pub validity_before: ValidityReport,
    pub validity_after: ValidityReport,
    pub outliers: OutlierReport,
}

#[derive(Serialize)]
struct RefinementSummary<'a> {
    variant: &'a str,
    config: &'a ClusteringConfig,
    rows_before: usize,
    rows_after: usize,
    validity_before: &'a ValidityReport,
    validity_after: &'a ValidityReport,
    outliers: &'a OutlierReport,
}

impl Refined {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_dataset(&dir.join("dataset.csv"), &self.dataset)?;
        write_dataset(&dir.join("validation.csv"), &self.validation)?;
        write_json(&dir.join("normalization.json"), &self.stats)?;
        write_json(&dir.join("assignment.json"), &self.assignment.labels)?;
        write_json(
            &dir.join("refinement.json"),
            &RefinementSummary {
                variant: &self.variant,
                config: &self.config,
                rows_before: self.outliers.kept_rows.len() + self.outliers.removed_rows,
                rows_after: self.dataset.n_rows(),
                validity_before: &self.validity_before,
                validity_after: &self.validity_after,
                outliers: &self.outliers,
            },
        )
    }
}

/// Removes IQR outliers from the winning variant and re-runs the winning
/// configuration on what is left.
pub fn refine_winner(
    pre: &PreprocessOutput,
    selection: &Selection,
    iqr_factor: f64,
    silhouette_cap: Option<usize>,
) -> Result<Refined> {
    let missing = |what: &str| PipelineError::Config(format!("no {what} for variant {}", selection.variant));
    let ds = pre.variants.get(&selection.variant).ok_or_else(|| missing("dataset"))?;
    let g = pre.variant_granularity.get(&selection.variant).ok_or_else(|| missing("granularity"))?;
    let validation = pre.validation.get(g).ok_or_else(|| missing("validation data"))?;
    let stats = pre.stats.get(g).ok_or_else(|| missing("normalization stats"))?;
    if validation.n_rows() != ds.n_rows() {
        return Err(PipelineError::Config(format!(
            "validation data has {} rows but variant {} has {}",
            validation.n_rows(),
            selection.variant,
            ds.n_rows()
        )));
    }
    let seed = selection.config.seed;
    let before = run(ds.values.view(), &selection.config)?;
    let validity_before = ValidityReport::compute_with(ds.values.view(), &before, silhouette_cap, seed);
    let (kept, outliers) = remove_outliers_iqr(ds, iqr_factor);
    if kept.n_rows() < 3 {
        return Err(PipelineError::Config(format!(
            "IQR factor {iqr_factor} leaves only {} rows",
            kept.n_rows()
        )));
    }
    let assignment = run(kept.values.view(), &selection.config)?;
    let validity_after = ValidityReport::compute_with(kept.values.view(), &assignment, silhouette_cap, seed);
    let stats = stats
        .subset(&kept.feature_names())
        .ok_or_else(|| PipelineError::Config("normalization stats do not cover the variant columns".into()))?;
    Ok(Refined {
        variant: selection.variant.clone(),
        config: selection.config.clone(),
        validation: validation.select_rows(&outliers.kept_rows),
        dataset: kept,
        stats,
        assignment,
        validity_before,
        validity_after,
        outliers,
    })
}

/// Display labels from the most significant validation feature: each group is
/// named by whether its mean is above or below the overall mean.
pub fn display_labels(profile: &ClusterProfile) -> Vec<String> {
    let k = profile.cluster_sizes.len();
    let best = profile
        .features
        .iter()
        .filter(|f| f.significant)
        .min_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.feature.cmp(&b.feature)));
    let Some(f) = best else {
        return (0..k).map(|c| format!("group {c}")).collect();
    };
    let total: usize = profile.cluster_sizes.iter().sum();
    let overall = f
        .means
        .iter()
        .zip(&profile.cluster_sizes)
        .map(|(m, &n)| m * n as f64)
        .sum::<f64>()
        / total.max(1) as f64;
    (0..k)
        .map(|c| {
            let side = if f.means.get(c).copied().unwrap_or(overall) >= overall { "higher" } else { "lower" };
            format!("group {c} ({side} {})", f.feature)
        })
        .collect()
}

/// Feature descriptions from the pipeline config, keyed by dataset column.
pub fn glossary_from(cfg: &PipelineConfig, ds: &Dataset) -> BTreeMap<String, String> {
    ds.columns
        .iter()
        .filter_map(|c| {
            let entry = cfg.features.iter().find(|f| f.name == c.source)?;
            let d = entry.description.clone()?;
            Some((c.name.clone(), if c.name == c.source { d } else { format!("{d}: {}", c.name) }))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSettings {
    pub n_exemplars: usize,
    pub alpha: f64,
    /// Share of clustered rows held out to score the surrogate.
    pub holdout: f64,
    pub lime: LimeConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub created: String,
    pub preamble: String,
}

impl Default for ContextSettings {
    fn default() -> Self {
        Self {
            n_exemplars: 20,
            alpha: 0.05,
            holdout: 0.2,
            lime: LimeConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
            created: String::new(),
            preamble: String::new(),
        }
    }
}

/// Trains and scores the surrogate, profiles the groups and explains a seeded
/// sample of exemplars.
pub fn build_context(
    refined: &Refined,
    glossary: &BTreeMap<String, String>,
    settings: &ContextSettings,
) -> Result<Thesaurus> {
    let ds = &refined.dataset;
    let labels = &refined.assignment.labels;
    let clustered: Vec<usize> = (0..ds.n_rows()).filter(|&i| labels[i] >= 0).collect();
    if clustered.is_empty() {
        return Err(PipelineError::Config("the final clustering marks every row as noise".into()));
    }
    let mut order = clustered.clone();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng_for(settings.seed, "holdout"));
    let n_test = ((order.len() as f64) * settings.holdout).round() as usize;
    let n_test = n_test.min(order.len().saturating_sub(2));
    let (test, train) = order.split_at(n_test);
    let mut train = train.to_vec();
    train.sort_unstable();
    let mut test = test.to_vec();
    test.sort_unstable();
    let pick = |rows: &[usize]| -> (Array2<f64>, Vec<i32>) {
        (ds.values.select(ndarray::Axis(0), rows), rows.iter().map(|&i| labels[i]).collect())
    };
    let (xt, yt) = pick(&train);
    let names = ds.feature_names();
    let train_cfg = TrainConfig {
        seed: derive_seed(settings.seed, "surrogate"),
        ..settings.train.clone()
    };
    let model = train_linear(xt.view(), &yt, &names, &train_cfg)?;
    let (xe, ye) = if test.is_empty() { pick(&train) } else { pick(&test) };
    let scores = model.evaluate(xe.view(), &ye)?;

    let mut profile = characterize_clusters(&refined.validation, labels, settings.alpha, None)?;
    profile.labels = display_labels(&profile);

    let n = settings.n_exemplars.min(clustered.len());
    let mut picks = rand::seq::index::sample(&mut rng_for(settings.seed, "exemplars"), clustered.len(), n).into_vec();
    picks.sort_unstable();
    let ids: Vec<String> = picks.iter().map(|&i| ds.row_id(clustered[i])).collect();
    if settings.n_exemplars > clustered.len() {
        log::warn!("only {} clustered rows available for {} exemplars", clustered.len(), settings.n_exemplars);
    }
    let notes = vec![
        format!(
            "surrogate scored on a {:.0}% hold-out of {} clustered rows",
            settings.holdout * 100.0,
            clustered.len()
        ),
        format!(
            "IQR rule (factor {}) removed {} rows before the final clustering",
            refined.outliers.factor, refined.outliers.removed_rows
        ),
    ];
    Ok(build_thesaurus(ThesaurusInputs {
        dataset: ds,
        normalization: &refined.stats,
        variant: &refined.variant,
        clustering: &refined.config,
        labels,
        validity: &refined.validity_after,
        profile: &profile,
        surrogate: &model,
        surrogate_scores: &scores,
        exemplar_ids: &ids,
        lime: &settings.lime,
        preamble: &settings.preamble,
        glossary,
        seed: settings.seed,
        created: &settings.created,
        notes,
    })?)
}

/// The LIME explanation the thesaurus holds for an instance, computed the same
/// way when the instance is not in the exemplar bank.
pub fn ground_truth(t: &Thesaurus, ds: &Dataset, instance_id: &str) -> Result<FeatureImportanceVector> {
    if let Some(e) = t.exemplar(instance_id) {
        return Ok(e.explanation.clone());
    }
    t.verify(ds)?;
    let row = ds
        .row_index(instance_id)
        .ok_or_else(|| crate::llm::LlmError::UnknownInstance(instance_id.to_string()))?;
    let x = ds.values.row(row);
    let model = &t.surrogate.model;
    let target = model.predict(x.insert_axis(ndarray::Axis(0)))?[0];
    let stats = FeatureStats::from_data(&ds.feature_names(), ds.values.view());
    let cfg = LimeConfig {
        seed: derive_seed(t.provenance.seed, &format!("lime/{instance_id}")),
        ..t.provenance.lime.clone()
    };
    Ok(lime_explain(model, x, target, &stats, &cfg)?.importance.with_instance(instance_id))
}

pub fn ground_map(t: &Thesaurus, ds: &Dataset, ids: &[String]) -> Result<BTreeMap<String, Vec<(String, Sign)>>> {
    ids.iter()
        .map(|id| Ok((id.clone(), ranking_of(&ground_truth(t, ds, id)?))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub bundle: PromptBundle,
    pub completion: Completion,
    pub parsed: ParsedExplanation,
}

pub fn explain_instance(
    t: &Thesaurus,
    ds: &Dataset,
    instance_id: &str,
    mode: ShotMode,
    seed: u64,
    backend: &dyn LlmBackend,
) -> Result<Explanation> {
    let bundle = build_prompt(t, ds, instance_id, mode, seed)?;
    let completion = backend.complete(&bundle)?;
    let parsed = parse_response(&completion.text, &t.feature_names())?;
    Ok(Explanation {
        bundle,
        completion,
        parsed,
    })
}

fn prompt_text(b: &PromptBundle) -> String {
    format!("{}\n\n{}", b.system_text, b.user_message())
}

/// Scores every (backend, mode, instance) combination against the thesaurus
/// ground truth.
pub fn evaluate_batch(
    t: &Thesaurus,
    ds: &Dataset,
    ids: &[String],
    modes: &[ShotMode],
    backends: &[&dyn LlmBackend],
    seed: u64,
    concurrency: usize,
) -> Result<Vec<QualityReport>> {
    let grounds: Vec<FeatureImportanceVector> =
        ids.iter().map(|id| ground_truth(t, ds, id)).collect::<Result<_>>()?;
    let features = t.feature_names();
    let mut reports = Vec::new();
    for backend in backends {
        for &mode in modes {
            let bundles: Vec<PromptBundle> =
                ids.iter().map(|id| build_prompt(t, ds, id, mode, seed)).collect::<std::result::Result<_, _>>()?;
            let completions = complete_batch(*backend, &bundles, concurrency)?;
            for ((bundle, completion), ground) in bundles.iter().zip(completions).zip(&grounds) {
                let parsed = parse_response(&completion?.text, &features)?;
                reports.push(evaluate_quality(
                    &prompt_text(bundle),
                    &parsed,
                    ground,
                    Provenance {
                        instance_id: bundle.instance_id.clone(),
                        model: backend.model_name(),
                        technique: mode.technique().to_string(),
                    },
                )?);
            }
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOptions {
    pub seed: u64,
    pub shape: DemoShape,
    pub bench: BenchmarkConfig,
    pub criterion: Criterion,
    pub iqr_factor: f64,
    pub context: ContextSettings,
    pub concurrency: usize,
}

impl DemoOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            shape: DemoShape::default(),
            bench: BenchmarkConfig {
                seed,
                spectral_cap: 300,
                silhouette_cap: Some(2000),
                ..BenchmarkConfig::default()
            },
            criterion: Criterion::Silhouette,
            iqr_factor: 1.5,
            context: ContextSettings {
                seed,
                created: "1970-01-01T00:00:00Z".into(),
                preamble: DEMO_PREAMBLE.into(),
                ..ContextSettings::default()
            },
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoSummary {
    pub out_dir: PathBuf,
    pub benchmark_rows: usize,
    pub selection: Selection,
    pub silhouette_before: Option<f64>,
    pub silhouette_after: Option<f64>,
    pub exemplars: usize,
    pub quality_rows: usize,
    pub mean_spearman: f64,
    pub stage_times: Vec<(String, Duration)>,
}

/// Synthetic data through every stage: preprocess, benchmark, IQR re-run,
/// thesaurus, one stub explanation and a quality batch. All artifacts go under
/// `out`.
pub fn run_demo(out: &Path, opts: &DemoOptions) -> Result<DemoSummary> {
    let mut times = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, times: &mut Vec<(String, Duration)>| {
        times.push((name.to_string(), clock.elapsed()));
        clock = Instant::now();
    };
    let data_path = out.join("data").join("demo.csv");
    std::fs::create_dir_all(out.join("data")).map_err(|e| PipelineError::Io {
        path: out.display().to_string(),
        message: e.to_string(),
    })?;
    let write = |p: &Path, text: &str| {
        std::fs::write(p, text).map_err(|e| PipelineError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })
    };
    write(&data_path, &generate_demo_csv(opts.seed, opts.shape))?;
    write(&out.join("data").join("pipeline.toml"), DEMO_CONFIG)?;
    let cfg = demo_config();

    let pre = run_preprocess(&cfg, &data_path)?;
    write_preprocessed(&out.join("preprocessed"), &pre)?;
    lap("preprocess", &mut times);

    let algorithms = [
        ClusteringAlgorithm::Kmeans,
        ClusteringAlgorithm::FuzzyCmeans,
        ClusteringAlgorithm::Dbscan,
        ClusteringAlgorithm::Spectral,
    ];
    let report = run_benchmark(&pre.variants, &algorithms, &opts.bench, &opts.context.created)?;
    let selection = select_best(&report, opts.criterion)?;
    let bench_dir = out.join("benchmark");
    write_benchmark(&bench_dir, &report, &selection)?;
    lap("benchmark", &mut times);

    let refined = refine_winner(&pre, &selection, opts.iqr_factor, opts.bench.silhouette_cap)?;
    refined.write(&out.join("refined"))?;
    lap("refine", &mut times);

    let glossary = glossary_from(&cfg, &refined.dataset);
    let t = build_context(&refined, &glossary, &opts.context)?;
    save_thesaurus(&t, &out.join("thesaurus.json"))?;
    lap("thesaurus", &mut times);

    let ds = &refined.dataset;
    let ids: Vec<String> = t.exemplars.iter().map(|e| e.instance_id.clone()).collect();
    let probe = (0..ds.n_rows())
        .map(|i| ds.row_id(i))
        .find(|id| !ids.contains(id) && refined.assignment.labels[ds.row_index(id).unwrap_or(0)] >= 0)
        .unwrap_or_else(|| ids[0].clone());
    let mut all = ids.clone();
    all.push(probe.clone());
    let echo = StubBackend::new("echo-stub", StubMode::Echo(ground_map(&t, ds, &all)?)).with_glossary(t.glossary.clone());
    let explanation = explain_instance(&t, ds, &probe, ShotMode::few(), opts.seed, &echo)?;
    write_json(&out.join("explain").join("explanation.json"), &explanation)?;
    lap("explain", &mut times);

    let modes = [ShotMode::Zero, ShotMode::One, ShotMode::few()];
    let reports = evaluate_batch(&t, ds, &ids, &modes, &[&echo], opts.seed, opts.concurrency)?;
    write_quality(&out.join("quality"), &reports)?;
    lap("evaluate", &mut times);

    let mean_spearman = reports.iter().map(|r| r.content.spearman).sum::<f64>() / reports.len().max(1) as f64;
    Ok(DemoSummary {
        out_dir: out.to_path_buf(),
        benchmark_rows: report.rows.len(),
        selection,
        silhouette_before: refined.validity_before.silhouette,
        silhouette_after: refined.validity_after.silhouette,
        exemplars: t.exemplars.len(),
        quality_rows: reports.len(),
        mean_spearman,
        stage_times: times,
    })
}

fn file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let io = |e: std::io::Error| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(io)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?))
}

/// `benchmark.csv`, `benchmark.json` and `selection.json`.
pub fn write_benchmark(dir: &Path, report: &crate::thesaurus::BenchmarkReport, selection: &Selection) -> Result<()> {
    let path = dir.join("benchmark.csv");
    report.write_csv(file(&path)?).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    write_json(&dir.join("benchmark.json"), report)?;
    write_json(&dir.join("selection.json"), selection)
}

/// `quality_instances.csv` and `quality_summary.csv`.
pub fn write_quality(dir: &Path, reports: &[QualityReport]) -> Result<()> {
    write_reports_csv(reports, file(&dir.join("quality_instances.csv"))?)?;
    write_summary_csv(&summarize(reports), file(&dir.join("quality_summary.csv"))?)?;
    Ok(())
}
