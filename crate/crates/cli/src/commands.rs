use std::path::{Path, PathBuf};

use clap::Args;

use hcx_core::clustering::ClusteringAlgorithm;
use hcx_core::data::PipelineConfig;
use hcx_core::llm::{LlmBackend, ShotMode};
use hcx_core::pipeline::{
    build_context, evaluate_batch, explain_instance, glossary_from, read_dataset, read_json, read_preprocessed,
    refine_winner, run_demo, run_preprocess, write_benchmark, write_json, write_preprocessed, write_quality,
    ContextSettings, DemoOptions, PipelineError, Result, DEMO_PREAMBLE,
};
use hcx_core::quality::summarize;
use hcx_core::thesaurus::{load_thesaurus, run_benchmark, save_thesaurus, select_best, BenchmarkConfig, Criterion, Selection};

use crate::backends::make_backend;
use crate::BackendArgs;

const DEFAULT_ALGORITHMS: &str = "kmeans,fuzzy_cmeans,dbscan,spectral";

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("{what} {} does not exist", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("{what} {} does not exist", path.display())))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// `--timestamp`, else `SOURCE_DATE_EPOCH`, else the Unix epoch, so reruns
/// write identical files.
fn resolve_timestamp(flag: Option<&str>) -> Result<String> {
    if let Some(t) = flag {
        return chrono::DateTime::parse_from_rfc3339(t)
            .map(|_| t.to_string())
            .map_err(|e| PipelineError::Config(format!("--timestamp {t:?} is not RFC 3339: {e}")));
    }
    let secs = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .map_err(|_| PipelineError::Config(format!("SOURCE_DATE_EPOCH {v:?} is not an integer")))?,
        Err(_) => 0,
    };
    let at = chrono::DateTime::from_timestamp(secs, 0)
        .ok_or_else(|| PipelineError::Config(format!("SOURCE_DATE_EPOCH {secs} is out of range")))?;
    Ok(at.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

fn parse_list(text: &str) -> Vec<String> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_mode(mode: &str, k: Option<usize>) -> Result<ShotMode> {
    let parsed: ShotMode = mode.parse().map_err(PipelineError::from)?;
    match (parsed, k) {
        (ShotMode::Few { .. }, Some(k)) => {
            let m = ShotMode::Few { k };
            m.validate().map_err(PipelineError::from)?;
            Ok(m)
        }
        (_, Some(_)) => Err(PipelineError::Config("--k only applies to --mode few".into())),
        (m, None) => Ok(m),
    }
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Pipeline config (TOML) with the schema, preprocessing and variants.
    #[arg(long)]
    pub config: PathBuf,
    /// Raw long-format CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn preprocess(a: &PreprocessArgs) -> Result<()> {
    require_file(&a.config, "config file")?;
    require_file(&a.data, "data file")?;
    let cfg = PipelineConfig::from_path(&a.config)?;
    let pre = run_preprocess(&cfg, &a.data)?;
    write_preprocessed(&a.out, &pre)?;
    println!(
        "loaded {} rows ({} features); wrote {} variants to {}",
        pre.load_report.rows,
        pre.load_report.loaded_features.len(),
        pre.variants.len(),
        a.out.display()
    );
    for (key, ds) in &pre.variants {
        println!("  {key}: {} rows x {} columns", ds.n_rows(), ds.n_cols());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory written by `hcx preprocess`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Winner criterion: silhouette, dbi, chi, dunn, pbm or xie_beni.
    #[arg(long, default_value = "silhouette")]
    pub criterion: String,
    /// Comma-separated algorithms.
    #[arg(long, default_value = DEFAULT_ALGORITHMS)]
    pub algorithms: String,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    /// Seeded restarts per k-means fit.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Rows used to build the spectral affinity graph.
    #[arg(long, default_value_t = 300)]
    pub spectral_cap: usize,
    /// Rows used to estimate silhouette in reports (0 for all rows).
    #[arg(long, default_value_t = 2000)]
    pub silhouette_cap: usize,
}

fn parse_criterion(s: &str) -> Result<Criterion> {
    Criterion::parse(&s.replace('-', "_"))
        .ok_or_else(|| PipelineError::Config(format!("unknown criterion `{s}` (silhouette, dbi, chi, dunn, pbm, xie_beni)")))
}

fn parse_algorithms(s: &str) -> Result<Vec<ClusteringAlgorithm>> {
    let algos = parse_list(s)
        .iter()
        .map(|a| {
            ClusteringAlgorithm::parse(&a.replace('-', "_"))
                .ok_or_else(|| PipelineError::Config(format!("unknown algorithm `{a}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if algos.is_empty() {
        return Err(PipelineError::Config("--algorithms is empty".into()));
    }
    Ok(algos)
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    require_dir(&a.input, "preprocessed directory")?;
    let criterion = parse_criterion(&a.criterion)?;
    let algorithms = parse_algorithms(&a.algorithms)?;
    if a.k_min < 2 || a.k_max < a.k_min {
        return Err(PipelineError::Config(format!("invalid k range {}..={}", a.k_min, a.k_max)));
    }
    let pre = read_preprocessed(&a.input)?;
    let cfg = BenchmarkConfig {
        seed: a.seed,
        k_min: a.k_min,
        k_max: a.k_max,
        restarts: a.restarts.max(1),
        spectral_cap: a.spectral_cap.max(2),
        silhouette_cap: (a.silhouette_cap > 0).then_some(a.silhouette_cap),
        ..BenchmarkConfig::default()
    };
    let report = run_benchmark(&pre.variants, &algorithms, &cfg, &resolve_timestamp(None)?)?;
    let selection = select_best(&report, criterion)?;
    write_benchmark(&a.out, &report, &selection)?;
    println!(
        "{} rows written to {}",
        report.rows.len(),
        a.out.join("benchmark.csv").display()
    );
    println!(
        "winner: {} {} ({} = {:.6})",
        selection.variant,
        selection.algorithm.as_str(),
        selection.criterion.as_str(),
        selection.value
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ThesaurusArgs {
    /// Directory written by `hcx preprocess`.
    #[arg(long)]
    pub input: PathBuf,
    /// `selection.json` written by `hcx benchmark`.
    #[arg(long)]
    pub selection: PathBuf,
    /// Pipeline config; feature descriptions become the glossary.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Instances explained and stored in the exemplar bank.
    #[arg(long, default_value_t = 20)]
    pub exemplars: usize,
    /// Significance level of the group profile.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// IQR outlier factor applied before the final clustering.
    #[arg(long, default_value_t = 1.5)]
    pub iqr: f64,
    /// Share of clustered rows held out to score the surrogate.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Text file with the domain preamble (defaults to the wearable preamble).
    #[arg(long)]
    pub preamble: Option<PathBuf>,
    /// Creation time recorded in the bundle (RFC 3339).
    #[arg(long)]
    pub timestamp: Option<String>,
    /// Rows used to estimate silhouette (0 for all rows).
    #[arg(long, default_value_t = 2000)]
    pub silhouette_cap: usize,
}

pub fn thesaurus(a: &ThesaurusArgs) -> Result<()> {
    require_dir(&a.input, "preprocessed directory")?;
    require_file(&a.selection, "selection file")?;
    require_file(&a.config, "config file")?;
    if a.exemplars == 0 {
        return Err(PipelineError::Config("--exemplars must be at least 1".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(PipelineError::Config(format!("--alpha must be in (0, 1), got {}", a.alpha)));
    }
    if !(a.iqr > 0.0) {
        return Err(PipelineError::Config(format!("--iqr must be positive, got {}", a.iqr)));
    }
    if !(0.0..1.0).contains(&a.holdout) {
        return Err(PipelineError::Config(format!("--holdout must be in [0, 1), got {}", a.holdout)));
    }
    let preamble = match &a.preamble {
        Some(p) => {
            require_file(p, "preamble file")?;
            std::fs::read_to_string(p).map_err(|e| PipelineError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => DEMO_PREAMBLE.to_string(),
    };
    let cfg = PipelineConfig::from_path(&a.config)?;
    let pre = read_preprocessed(&a.input)?;
    let selection: Selection = read_json(&a.selection)?;
    let cap = (a.silhouette_cap > 0).then_some(a.silhouette_cap);
    let refined = refine_winner(&pre, &selection, a.iqr, cap)?;
    create_dir(&a.out)?;
    refined.write(&a.out.join("refined"))?;
    let settings = ContextSettings {
        n_exemplars: a.exemplars,
        alpha: a.alpha,
        holdout: a.holdout,
        seed: a.seed,
        created: resolve_timestamp(a.timestamp.as_deref())?,
        preamble,
        ..ContextSettings::default()
    };
    let glossary = glossary_from(&cfg, &refined.dataset);
    let t = build_context(&refined, &glossary, &settings)?;
    let path = a.out.join("thesaurus.json");
    save_thesaurus(&t, &path)?;
    let silhouette = |v: Option<f64>| v.map_or("n/a".to_string(), |s| format!("{s:.4}"));
    println!(
        "{} {}: removed {} outlier rows, silhouette {} -> {}",
        refined.variant,
        refined.config.algorithm.as_str(),
        refined.outliers.removed_rows,
        silhouette(refined.validity_before.silhouette),
        silhouette(refined.validity_after.silhouette)
    );
    println!(
        "thesaurus with {} exemplars written to {} (surrogate accuracy {:.4}, macro-F1 {:.4})",
        t.exemplars.len(),
        path.display(),
        t.surrogate.scores.accuracy,
        t.surrogate.scores.macro_f1
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Thesaurus file written by `hcx thesaurus`.
    #[arg(long)]
    pub thesaurus: PathBuf,
    /// Dataset the thesaurus was built from (`refined/dataset.csv`).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Instance id, `<entity>@<timestamp>`.
    #[arg(long)]
    pub instance: String,
    #[arg(long)]
    pub seed: u64,
    /// Shot mode: zero, one or few.
    #[arg(long, default_value = "few")]
    pub mode: String,
    /// Worked examples for `--mode few`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Backend: echo, reversed, shot-copy, alphabetical, script or http.
    #[arg(long, default_value = "echo")]
    pub backend: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub llm: BackendArgs,
}

pub fn explain(a: &ExplainArgs) -> Result<()> {
    require_file(&a.thesaurus, "thesaurus file")?;
    require_file(&a.dataset, "dataset file")?;
    let mode = parse_mode(&a.mode, a.k)?;
    let t = load_thesaurus(&a.thesaurus)?;
    let ds = read_dataset(&a.dataset)?;
    t.verify(&ds)?;
    let backend = make_backend(&a.backend, &t, &ds, std::slice::from_ref(&a.instance), &a.llm)?;
    let e = explain_instance(&t, &ds, &a.instance, mode, a.seed, backend.as_ref())?;
    write_json(&a.out.join("explanation.json"), &e)?;
    write_json(&a.out.join("prompt_bundle.json"), &e.bundle)?;
    println!("instance {} ({}), {} via {}", e.bundle.instance_id, e.bundle.cluster_label, mode.technique(), backend.model_name());
    println!();
    println!("Technical ranking:");
    for (i, (feature, sign)) in e.parsed.technical_ranking.iter().enumerate() {
        println!("  {}. {} {feature}", i + 1, sign.as_char());
    }
    println!();
    println!("Explanation:");
    println!("  {}", e.parsed.narrative);
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Thesaurus file written by `hcx thesaurus`.
    #[arg(long)]
    pub thesaurus: PathBuf,
    /// Dataset the thesaurus was built from (`refined/dataset.csv`).
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated shot modes (zero, one, few, few:<k>).
    #[arg(long, default_value = "zero,one,few")]
    pub modes: String,
    /// Comma-separated backends (echo, reversed, shot-copy, alphabetical, script, http).
    #[arg(long, default_value = "echo")]
    pub backends: String,
    /// Comma-separated instance ids (default: the exemplar bank).
    #[arg(long)]
    pub instances: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub llm: BackendArgs,
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    require_file(&a.thesaurus, "thesaurus file")?;
    require_file(&a.dataset, "dataset file")?;
    let modes = parse_list(&a.modes)
        .iter()
        .map(|m| m.parse::<ShotMode>().map_err(PipelineError::from))
        .collect::<Result<Vec<_>>>()?;
    let names = parse_list(&a.backends);
    if modes.is_empty() || names.is_empty() {
        return Err(PipelineError::Config("--modes and --backends need at least one entry".into()));
    }
    let t = load_thesaurus(&a.thesaurus)?;
    let ds = read_dataset(&a.dataset)?;
    t.verify(&ds)?;
    let ids = match &a.instances {
        Some(list) => parse_list(list),
        None => t.exemplars.iter().map(|e| e.instance_id.clone()).collect(),
    };
    if ids.is_empty() {
        return Err(PipelineError::Config("no instances to evaluate".into()));
    }
    let backends = names
        .iter()
        .map(|n| make_backend(n, &t, &ds, &ids, &a.llm))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&dyn LlmBackend> = backends.iter().map(|b| b.as_ref()).collect();
    let concurrency = a.llm.concurrency.unwrap_or(4).max(1);
    let reports = evaluate_batch(&t, &ds, &ids, &modes, &refs, a.seed, concurrency)?;
    write_quality(&a.out, &reports)?;
    println!("{:<22} {:<10} {:>4} {:>9} {:>9} {:>9}", "model", "technique", "n", "spearman", "ndcg_diff", "euclid");
    for s in summarize(&reports) {
        println!(
            "{:<22} {:<10} {:>4} {:>9.4} {:>9.4} {:>9.4}",
            s.model,
            s.technique,
            s.n,
            s.spearman(),
            s.ndcg_difference(),
            s.means[6]
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn demo(a: &DemoArgs) -> Result<()> {
    create_dir(&a.out)?;
    let opts = DemoOptions::new(a.seed);
    let s = run_demo(&a.out, &opts)?;
    for (stage, time) in &s.stage_times {
        log::info!("{stage}: {:.2?}", time);
    }
    let silhouette = |v: Option<f64>| v.map_or("n/a".to_string(), |s| format!("{s:.4}"));
    println!("benchmark rows: {}", s.benchmark_rows);
    println!(
        "winner: {} {} ({} = {:.6})",
        s.selection.variant,
        s.selection.algorithm.as_str(),
        s.selection.criterion.as_str(),
        s.selection.value
    );
    println!(
        "silhouette before/after IQR: {} / {}",
        silhouette(s.silhouette_before),
        silhouette(s.silhouette_after)
    );
    println!("exemplars: {}", s.exemplars);
    println!("quality rows: {} (mean spearman {:.4})", s.quality_rows, s.mean_spearman);
    println!("artifacts in {}", s.out_dir.display());
    Ok(())
}
