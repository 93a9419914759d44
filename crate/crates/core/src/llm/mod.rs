//! Prompt construction, chat-completion backends and response parsing.

mod backend;
mod parse;
mod prompt;

pub use backend::{
    complete_batch, load_stub_script, save_stub_script, Completion, HttpBackend, LlmBackend, StubBackend,
    StubMode, StubScript, Usage, STUB_SCRIPT_FORMAT,
};
pub use parse::{parse_response, ParsePath, ParsedExplanation};
pub use prompt::{
    build_prompt, render_answer, render_instance, render_ranking, ranking_of, BackendKind, LlmConfig, PromptBundle,
    Shot, ShotMode, OUTPUT_CONTRACT,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::thesaurus::ThesaurusError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("dataset fingerprint {found} does not match the thesaurus ({expected})")]
    FingerprintMismatch { expected: String, found: String },
    #[error("{requested} shots requested but only {available} exemplars are available")]
    BankTooSmall { requested: usize, available: usize },
    #[error("instance {0} is not in the dataset")]
    UnknownInstance(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("endpoint returned HTTP {0}")]
    HttpStatus(u16),
    #[error("request timed out")]
    Timeout,
    #[error("malformed endpoint response: {0}")]
    BadResponse(String),
    #[error("stub script has no response for {0}")]
    StubKeyMissing(String),
    #[error("no ranking block and no known feature in the response")]
    Unparseable,
    #[error("response text is empty")]
    EmptyText,
    #[error(transparent)]
    Thesaurus(#[from] ThesaurusError),
}

pub type Result<T> = std::result::Result<T, LlmError>;

/// Direction a feature pushes the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn of(w: f64) -> Self {
        if w < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}
