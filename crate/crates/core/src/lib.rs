//! Explainable clustering pipeline with LLM-ready context.
//!
//! The crate covers the whole path from raw behavioural time series to scored
//! natural-language explanations:
//!
//! * [`data`]: CSV ingestion and declarative preprocessing into numeric datasets.
//! * [`clustering`]: k-means, fuzzy c-means, DBSCAN and spectral clustering plus
//!   hyperparameter selection.
//! * [`validity`]: label-free validity indices and Mann-Whitney cluster profiling.
//! * [`surrogate`]: a multinomial logistic classifier trained on cluster labels.
//! * [`explain`]: LIME, Anchors, counterfactuals and coefficient explanations.
//! * [`thesaurus`]: the benchmark grid and the serialized context bundle.
//! * [`llm`]: prompt construction, chat-completion backends and response parsing.
//! * [`quality`]: structure and content metrics for generated explanations.
//! * [`pipeline`]: synthetic demo data and end-to-end orchestration.

pub mod clustering;
pub mod data;
pub mod explain;
pub mod linalg;
pub mod llm;
pub mod pipeline;
pub mod quality;
pub mod rng;
pub mod surrogate;
pub mod thesaurus;
pub mod validity;

pub use clustering::{Assignment, ClusteringAlgorithm, ClusteringConfig, FuzzyAssignment};
pub use data::{Dataset, FeatureSchema, NormalizationStats, PreprocessSpec, Schema, VariantSpec};
pub use explain::{AnchorRule, Classifier, Counterfactual, FeatureImportanceVector, LimeConfig};
pub use llm::{LlmConfig, ParsedExplanation, PromptBundle, ShotMode};
pub use quality::QualityReport;
pub use surrogate::LinearSurrogate;
pub use thesaurus::{BenchmarkReport, Thesaurus};
pub use validity::{ClusterProfile, ValidityReport};
