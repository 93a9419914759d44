//! The clustering benchmark grid and the serialized context bundle handed to
//! the LLM bridge.

mod benchmark;
mod bundle;
pub mod envelope;

pub use benchmark::{
    run_benchmark, select_best, BenchmarkConfig, BenchmarkReport, BenchmarkRow, CellStatus, CombinationAccounting,
    Criterion, Selection, XAI_METHODS,
};
pub use bundle::{
    build_thesaurus, exemplar_matrix, load_thesaurus, mean_fidelity, save_thesaurus, DatasetFingerprint, Exemplar,
    Provenance, SurrogateSummary, Thesaurus, ThesaurusInputs, THESAURUS_FORMAT, THESAURUS_VERSION,
};

#[cfg(test)]
pub(crate) use bundle::tests::build as bundle_fixture;

use thiserror::Error;

use crate::explain::ExplainError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThesaurusError {
    #[error("file version {found} is not supported (this build reads version {supported})")]
    VersionMismatch { found: u64, supported: u32 },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("expected a {expected} document, found {found}")]
    FormatMismatch { expected: String, found: String },
    #[error("json: {0}")]
    Json(String),
    #[error("io: {0}")]
    Io(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no benchmark cell finished successfully")]
    NoSuccessfulRun,
    #[error("exemplar bank is empty")]
    EmptyExemplarBank,
    #[error("dataset fingerprint {found} does not match the thesaurus ({expected})")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Explain(#[from] ExplainError),
}

pub type Result<T> = std::result::Result<T, ThesaurusError>;
