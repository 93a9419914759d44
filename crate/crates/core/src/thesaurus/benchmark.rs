use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, ThesaurusError};
use crate::clustering::{
    default_eps_grid, elbow_select_k, elbow_select_k_with, fuzzy_cmeans, grid_search_dbscan, kmeans, Assignment,
    ClusteringAlgorithm, ClusteringConfig, SpectralEmbedding,
};
use crate::data::Dataset;
use crate::rng::derive_seed;
use crate::validity::{unbounded, ValidityReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub fuzzifier: f64,
    pub min_samples_grid: Vec<usize>,
    /// Explicit eps grid; derived from k-distance quantiles when absent.
    pub eps_grid: Option<Vec<f64>>,
    pub eps_grid_size: usize,
    pub spectral_cap: usize,
    /// Silhouette in reports is estimated on at most this many rows.
    pub silhouette_cap: Option<usize>,
    /// Number of LLMs and shot modes the explain stage will add (for the
    /// combination accounting only).
    pub llm_models: usize,
    pub shot_modes: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k_min: 2,
            k_max: 8,
            restarts: 10,
            fuzzifier: 2.0,
            min_samples_grid: vec![4, 8],
            eps_grid: None,
            eps_grid_size: 4,
            spectral_cap: 2000,
            silhouette_cap: Some(4000),
            llm_models: 2,
            shot_modes: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
    Skipped,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Failed => "failed",
            Self::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub variant: String,
    pub algorithm: ClusteringAlgorithm,
    /// Final configuration after hyperparameter selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ClusteringConfig>,
    pub validity: Option<ValidityReport>,
    pub k: Option<usize>,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// How the hyperparameters were chosen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<String>,
    /// Kept in memory and logs only, so serialized reports stay reproducible.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// How the reported number of data/model/XAI combinations decomposes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationAccounting {
    pub clustering_cells: usize,
    pub xai_methods: usize,
    /// LLMs × shot modes × response sections (technical ranking, narrative).
    pub llm_combinations: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub created: String,
    pub combinations: CombinationAccounting,
    pub rows: Vec<BenchmarkRow>,
}

/// Explanation methods applied to the winning model.
pub const XAI_METHODS: [&str; 4] = ["coefficients", "lime", "anchors", "counterfactuals"];

/// Selection criterion and whether larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Silhouette,
    Dbi,
    Chi,
    Dunn,
    Pbm,
    XieBeni,
}

impl Criterion {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "silhouette" => Self::Silhouette,
            "dbi" => Self::Dbi,
            "chi" => Self::Chi,
            "dunn" => Self::Dunn,
            "pbm" => Self::Pbm,
            "xie_beni" => Self::XieBeni,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Silhouette => "silhouette",
            Self::Dbi => "dbi",
            Self::Chi => "chi",
            Self::Dunn => "dunn",
            Self::Pbm => "pbm",
            Self::XieBeni => "xie_beni",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Self::Dbi | Self::XieBeni)
    }

    pub fn value(self, r: &ValidityReport) -> Option<f64> {
        match self {
            Self::Silhouette => r.silhouette,
            Self::Dbi => r.dbi,
            Self::Chi => r.chi,
            Self::Dunn => r.dunn,
            Self::Pbm => r.pbm,
            Self::XieBeni => r.xie_beni,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub variant: String,
    pub algorithm: ClusteringAlgorithm,
    pub config: ClusteringConfig,
    pub criterion: Criterion,
    pub value: f64,
    pub rationale: String,
}

/// Chooses hyperparameters for one cell and returns the final configuration,
/// its assignment and a note on how it was chosen.
fn run_cell(
    x: ArrayView2<f64>,
    algorithm: ClusteringAlgorithm,
    cfg: &BenchmarkConfig,
    seed: u64,
) -> std::result::Result<(ClusteringConfig, Assignment, String), String> {
    let k_range = cfg.k_min..=cfg.k_max.min(x.nrows());
    let err = |e: crate::clustering::ClusterError| e.to_string();
    match algorithm {
        ClusteringAlgorithm::Kmeans => {
            let (k, diag) = elbow_select_k(x, k_range, seed).map_err(err)?;
            let c = ClusteringConfig::kmeans(k, seed).with_restarts(cfg.restarts);
            let a = kmeans(x, &c).map_err(err)?;
            Ok((c, a, format!("elbow over k={:?}: {}", diag.k_values, diag.rule)))
        }
        ClusteringAlgorithm::FuzzyCmeans => {
            let fit = |k: usize| {
                let c = ClusteringConfig::fuzzy_cmeans(k, cfg.fuzzifier, seed).with_restarts(cfg.restarts.min(3));
                fuzzy_cmeans(x, &c).map(|f| f.harden())
            };
            let (k, _) = elbow_select_k_with(x, k_range, seed, fit).map_err(err)?;
            let c = ClusteringConfig::fuzzy_cmeans(k, cfg.fuzzifier, seed).with_restarts(cfg.restarts.min(3));
            let a = fit(k).map_err(err)?;
            Ok((c, a, "elbow on within-group sum of squares of hardened memberships".into()))
        }
        ClusteringAlgorithm::Spectral => {
            let emb = SpectralEmbedding::build(x, cfg.spectral_cap, seed).map_err(err)?;
            let make = |k: usize| {
                let mut c = ClusteringConfig::spectral(k, seed).with_restarts(cfg.restarts);
                c.spectral_cap = cfg.spectral_cap;
                c
            };
            let hi = (*k_range.end()).min(emb.sample.len());
            let (k, _) = elbow_select_k_with(x, cfg.k_min..=hi, seed, |k| emb.cluster(x, &make(k))).map_err(err)?;
            let c = make(k);
            let a = emb.cluster(x, &c).map_err(err)?;
            Ok((c, a, format!("elbow on within-group sum of squares; graph on {} rows", emb.sample.len())))
        }
        ClusteringAlgorithm::Dbscan => {
            let mut best: Option<(f64, ClusteringConfig, Assignment)> = None;
            let mut cells = 0;
            for &ms in &cfg.min_samples_grid {
                let grid = match &cfg.eps_grid {
                    Some(g) => g.clone(),
                    None => default_eps_grid(x, ms, cfg.eps_grid_size, seed),
                };
                cells += grid.len();
                if let Ok(r) = grid_search_dbscan(x, &grid, &[ms], seed) {
                    let score = r.cells[r.best_index].score_value();
                    if best.as_ref().is_none_or(|b| score > b.0) {
                        best = Some((score, ClusteringConfig::dbscan(r.eps, r.min_samples), r.assignment));
                    }
                }
            }
            let (_, c, a) = best.ok_or_else(|| crate::clustering::ClusterError::NoValidCell.to_string())?;
            Ok((c, a, format!("grid search over {cells} (eps, min_samples) cells by silhouette")))
        }
        other => Err(format!("{} is reserved but not implemented", other.as_str())),
    }
}

/// Evaluates every (variant, algorithm) cell. Rows come back sorted by
/// variant then algorithm; each cell draws from its own seed stream.
pub fn run_benchmark(
    variants: &BTreeMap<String, Dataset>,
    algorithms: &[ClusteringAlgorithm],
    cfg: &BenchmarkConfig,
    created: &str,
) -> Result<BenchmarkReport> {
    if variants.is_empty() || algorithms.is_empty() {
        return Err(ThesaurusError::InvalidInput("benchmark needs at least one variant and one algorithm".into()));
    }
    let mut algos = algorithms.to_vec();
    algos.sort();
    algos.dedup();
    let cells: Vec<(&String, &Dataset, ClusteringAlgorithm)> = variants
        .iter()
        .flat_map(|(name, ds)| algos.iter().map(move |&a| (name, ds, a)))
        .collect();
    let rows: Vec<BenchmarkRow> = cells
        .par_iter()
        .map(|&(name, ds, algorithm)| {
            let mut row = BenchmarkRow {
                variant: name.clone(),
                algorithm,
                config: None,
                validity: None,
                k: None,
                status: CellStatus::Failed,
                reason: None,
                selection: None,
                wall_time_ms: 0.0,
            };
            if matches!(algorithm, ClusteringAlgorithm::Hdbscan | ClusteringAlgorithm::RobustBorderPeeling) {
                row.status = CellStatus::Skipped;
                row.reason = Some("reserved algorithm, not implemented".into());
                return row;
            }
            let seed = derive_seed(cfg.seed, &format!("{name}/{}", algorithm.as_str()));
            let start = Instant::now();
            let x = ds.values.view();
            match run_cell(x, algorithm, cfg, seed) {
                Ok((config, assignment, note)) => {
                    let report = ValidityReport::compute_with(x, &assignment, cfg.silhouette_cap, seed);
                    row.k = Some(assignment.n_clusters());
                    if report.k < 2 {
                        row.reason = Some(format!("only {} cluster(s) found", report.k));
                    } else {
                        row.status = CellStatus::Ok;
                    }
                    row.validity = Some(report);
                    row.config = Some(config);
                    row.selection = Some(note);
                }
                Err(e) => row.reason = Some(e),
            }
            row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            log::info!(
                "benchmark {name}/{}: {} in {:.1} ms",
                algorithm.as_str(),
                row.status.as_str(),
                row.wall_time_ms
            );
            row
        })
        .collect();
    let clustering_cells = rows.len();
    let llm_combinations = cfg.llm_models * cfg.shot_modes * 2;
    Ok(BenchmarkReport {
        seed: cfg.seed,
        created: created.to_string(),
        combinations: CombinationAccounting {
            clustering_cells,
            xai_methods: XAI_METHODS.len(),
            llm_combinations,
            total: clustering_cells + XAI_METHODS.len() + llm_combinations,
        },
        rows,
    })
}

fn cmp_opt(a: Option<f64>, b: Option<f64>, higher: bool) -> std::cmp::Ordering {
    let fill = if higher { f64::NEG_INFINITY } else { f64::INFINITY };
    let (a, b) = (a.unwrap_or(fill), b.unwrap_or(fill));
    if higher {
        a.total_cmp(&b)
    } else {
        b.total_cmp(&a)
    }
}

/// Best ok row by `criterion`; ties go to lower DBI, then higher CHI, then the
/// earlier row.
pub fn select_best(report: &BenchmarkReport, criterion: Criterion) -> Result<Selection> {
    let candidates: Vec<(usize, &BenchmarkRow, &ValidityReport, f64)> = report
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == CellStatus::Ok && r.config.is_some())
        .filter_map(|(i, r)| {
            let v = r.validity.as_ref()?;
            criterion.value(v).filter(|x| !x.is_nan()).map(|x| (i, r, v, x))
        })
        .collect();
    let best = candidates
        .iter()
        .max_by(|a, b| {
            cmp_opt(Some(a.3), Some(b.3), criterion.higher_is_better())
                .then_with(|| cmp_opt(a.2.dbi, b.2.dbi, false))
                .then_with(|| cmp_opt(a.2.chi, b.2.chi, true))
                .then_with(|| b.0.cmp(&a.0))
        })
        .ok_or(ThesaurusError::NoSuccessfulRun)?;
    let (_, row, _, value) = *best;
    let dir = if criterion.higher_is_better() { "highest" } else { "lowest" };
    Ok(Selection {
        variant: row.variant.clone(),
        algorithm: row.algorithm,
        config: row.config.clone().expect("filtered"),
        criterion,
        value,
        rationale: format!(
            "{} {} = {} among {} successful cells (ties: lower dbi, then higher chi)",
            dir,
            criterion.as_str(),
            unbounded::format(Some(value)),
            candidates.len()
        ),
    })
}

impl BenchmarkReport {
    /// One line per cell: `variant,algorithm,silhouette,dbi,chi,dunn,pbm,xie_beni,k,status`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["variant", "algorithm", "silhouette", "dbi", "chi", "dunn", "pbm", "xie_beni", "k", "status"])?;
        for r in &self.rows {
            let mut rec = vec![r.variant.clone(), r.algorithm.as_str().to_string()];
            match &r.validity {
                Some(v) => rec.extend(v.entries().iter().map(|e| unbounded::format(e.1))),
                None => rec.extend(std::iter::repeat_n("-".to_string(), 6)),
            }
            rec.push(r.k.map_or("-".into(), |k| k.to_string()));
            rec.push(r.status.as_str().into());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}
