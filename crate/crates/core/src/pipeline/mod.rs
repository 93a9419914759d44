//! Synthetic demo data and end-to-end orchestration of the stages.

mod artifacts;
mod demo;
mod stages;

pub use artifacts::{read_dataset, read_json, read_preprocessed, write_dataset, write_json, write_preprocessed};
pub use demo::{demo_config, generate_demo_csv, DemoShape, DEMO_CONFIG, DEMO_PREAMBLE};
pub use stages::{
    build_context, display_labels, evaluate_batch, explain_instance, ground_map, ground_truth, glossary_from,
    refine_winner, run_demo, run_preprocess, write_benchmark, write_quality, ContextSettings, DemoOptions, DemoSummary, Explanation,
    PreprocessOutput, Refined,
};

use thiserror::Error;

use crate::clustering::ClusterError;
use crate::data::DataError;
use crate::explain::ExplainError;
use crate::llm::LlmError;
use crate::quality::QualityError;
use crate::surrogate::SurrogateError;
use crate::thesaurus::ThesaurusError;
use crate::validity::ValidityError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Thesaurus(#[from] ThesaurusError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    /// Whether the failure is a problem with the inputs or configuration
    /// rather than with the run itself.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Config(_) => true,
            PipelineError::Data(e) => !matches!(e, DataError::Io(_)),
            PipelineError::Thesaurus(e) => matches!(
                e,
                ThesaurusError::VersionMismatch { .. }
                    | ThesaurusError::CorruptFile(_)
                    | ThesaurusError::FormatMismatch { .. }
                    | ThesaurusError::InvalidInput(_)
                    | ThesaurusError::EmptyExemplarBank
                    | ThesaurusError::FingerprintMismatch { .. }
            ),
            PipelineError::Llm(e) => matches!(
                e,
                LlmError::FingerprintMismatch { .. }
                    | LlmError::BankTooSmall { .. }
                    | LlmError::UnknownInstance(_)
                    | LlmError::InvalidConfig(_)
                    | LlmError::Thesaurus(
                        ThesaurusError::VersionMismatch { .. }
                            | ThesaurusError::CorruptFile(_)
                            | ThesaurusError::FormatMismatch { .. }
                            | ThesaurusError::FingerprintMismatch { .. }
                    )
            ),
            PipelineError::Cluster(ClusterError::InvalidConfig(_)) => true,
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            1
        }
    }
}
