//! Tabular ingestion and declarative preprocessing.
//!
//! The stages mirror how the raw wearable/survey tables are turned into
//! clustering input: [`load_csv`] → [`aggregate`] → [`fill_granularity`] →
//! [`impute`] → [`encode`] → [`split_roles`] → [`normalize`], with
//! [`remove_outliers_iqr`] and [`make_variants`] applied downstream.

mod aggregate;
mod config;
mod dataset;
mod encode;
mod fill;
mod impute;
mod normalize;
mod outliers;
mod pca;
mod raw;
mod roles;
mod schema;
mod spec;
mod variants;

pub use aggregate::aggregate;
pub use config::{FeatureEntry, PipelineConfig, VariantEntry};
pub use dataset::{Column, ColumnKind, Dataset};
pub use encode::encode;
pub use fill::fill_granularity;
pub use impute::{ensure_complete, impute};
pub use normalize::{normalize, ColumnStats, NormalizationStats};
pub(crate) use outliers::quantile_sorted;
pub use outliers::{remove_outliers_iqr, OutlierReport};
pub use pca::{pca_reduce, PcaModel};
pub use raw::{load_csv, load_csv_from_reader, LoadReport, RawColumn, RawTable, RawValues, TimestampFormat};
pub use roles::split_roles;
pub use schema::{FeatureCategory, FeatureKind, FeatureSchema, NativeGranularity, Role, Schema};
pub use spec::{
    Aggregation, Encoding, FeatureSpec, GranularityFill, MissingPolicy, Normalization, PreprocessSpec,
    TargetGranularity,
};
pub use variants::{make_variants, FeatureFilter, VariantSpec};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input file not found: {0}")]
    MissingFile(PathBuf),
    #[error("no schema feature found in CSV header")]
    HeaderMismatch,
    #[error("key column `{0}` missing from CSV header")]
    MissingKeyColumn(String),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("unparseable timestamp `{value}` on row {row}")]
    BadTimestamp { row: usize, value: String },
    #[error("aggregator {aggregation:?} is not defined for {kind:?} feature `{feature}`")]
    UnsupportedAggregator {
        feature: String,
        aggregation: Aggregation,
        kind: FeatureKind,
    },
    #[error("no preprocessing entry for feature `{0}`")]
    MissingFeatureSpec(String),
    #[error("column `{0}` has no observed value to impute from")]
    AllMissingColumn(String),
    #[error("column `{0}` still has missing values after preprocessing")]
    ResidualMissing(String),
    #[error("value `{value}` of `{feature}` is outside the declared level set")]
    UnknownLevel { feature: String, value: String },
    #[error("feature lists overlap on `{0}`")]
    OverlappingRoles(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("variant `{variant}` needs {expected:?} data but got {found:?}")]
    GranularityMismatch {
        variant: String,
        expected: TargetGranularity,
        found: Option<TargetGranularity>,
    },
    #[error("invalid preprocessing spec: {0}")]
    InvalidSpec(String),
    #[error("malformed dataset file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Output of the full preprocessing chain for one target granularity.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub training: Dataset,
    pub validation: Dataset,
    pub stats: NormalizationStats,
    pub pca: Option<PcaModel>,
}

/// Runs aggregation, fill, imputation, encoding, role split and normalisation.
/// Validation features stay in original units.
pub fn preprocess(
    raw: &RawTable,
    schema: &Schema,
    spec: &PreprocessSpec,
    target: TargetGranularity,
) -> Result<Preprocessed> {
    let mut spec = spec.clone();
    spec.target_granularity = target;
    let ds = aggregate(raw, schema, &spec)?;
    let ds = fill_granularity(&ds, &spec)?;
    let ds = impute(&ds, &spec)?;
    ensure_complete(&ds)?;
    let ds = encode(&ds, &spec)?;
    let training_names: Vec<String> = schema
        .features
        .iter()
        .filter(|f| f.role == Role::Training && ds.has_feature(&f.name))
        .map(|f| f.name.clone())
        .collect();
    let validation_names: Vec<String> = schema
        .features
        .iter()
        .filter(|f| f.role == Role::Validation && ds.has_feature(&f.name))
        .map(|f| f.name.clone())
        .collect();
    let (training, validation) = split_roles(&ds, &training_names, &validation_names)?;
    let (mut training, stats) = normalize(&training, spec.normalization);
    let pca = match spec.pca_variance {
        Some(v) => {
            let (reduced, model) = pca_reduce(&training, v)?;
            training = reduced;
            Some(model)
        }
        None => None,
    };
    Ok(Preprocessed {
        training,
        validation,
        stats,
        pca,
    })
}
