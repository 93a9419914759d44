use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_response, render_answer, LlmConfig, LlmError, PromptBundle, Result, Sign};
use crate::thesaurus::envelope::{from_checked_json, to_checked_json};
use crate::thesaurus::ThesaurusError;

pub const STUB_SCRIPT_FORMAT: &str = "hcx-stub-script";
const STUB_SCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub backend: String,
    pub model: String,
    pub attempts: u32,
    pub retries: u32,
    pub token_estimate: usize,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub instance_id: String,
    pub text: String,
    pub usage: Usage,
}

pub trait LlmBackend: Send + Sync {
    fn model_name(&self) -> String;

    fn complete(&self, bundle: &PromptBundle) -> Result<Completion>;
}

/// Completes every bundle with at most `concurrency` requests in flight.
/// Results keep the input order.
pub fn complete_batch(
    backend: &dyn LlmBackend,
    bundles: &[PromptBundle],
    concurrency: usize,
) -> Result<Vec<Result<Completion>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| LlmError::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| bundles.par_iter().map(|b| backend.complete(b)).collect()))
}

/// Chat-completions client with exponential backoff on transient failures.
pub struct HttpBackend {
    cfg: LlmConfig,
    agent: ureq::Agent,
    token: Option<String>,
}

enum Attempt {
    Transient(LlmError),
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(cfg: &LlmConfig) -> Result<Self> {
        cfg.validate()?;
        let token = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| LlmError::InvalidConfig(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            cfg: cfg.clone(),
            agent,
            token,
        })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.endpoint_url.trim_end_matches('/'))
    }

    fn body(&self, bundle: &PromptBundle) -> Value {
        let messages: Vec<Value> = bundle
            .messages()
            .into_iter()
            .map(|(role, content)| json!({"role": role, "content": content}))
            .collect();
        json!({
            "model": self.cfg.model_name,
            "messages": messages,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        })
    }

    fn attempt(&self, body: &Value) -> std::result::Result<(String, Option<u64>, Option<u64>), Attempt> {
        let mut req = self.agent.post(self.url());
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(body).map_err(classify)?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Transient(LlmError::HttpStatus(status)));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(LlmError::HttpStatus(status)));
        }
        let v: Value = resp.body_mut().read_json().map_err(classify)?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Attempt::Fatal(LlmError::BadResponse("missing choices[0].message.content".into())))?;
        let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64);
        Ok((text.to_string(), usage("prompt_tokens"), usage("completion_tokens")))
    }
}

fn classify(e: ureq::Error) -> Attempt {
    match e {
        ureq::Error::Timeout(_) => Attempt::Transient(LlmError::Timeout),
        ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
            Attempt::Transient(LlmError::Timeout)
        }
        ureq::Error::Json(j) => Attempt::Fatal(LlmError::BadResponse(j.to_string())),
        ureq::Error::BadUri(u) => Attempt::Fatal(LlmError::InvalidConfig(format!("bad endpoint url {u}"))),
        other => Attempt::Transient(LlmError::EndpointUnreachable(other.to_string())),
    }
}

impl LlmBackend for HttpBackend {
    fn model_name(&self) -> String {
        self.cfg.model_name.clone()
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<Completion> {
        let body = self.body(bundle);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok((text, prompt_tokens, completion_tokens)) => {
                    return Ok(Completion {
                        instance_id: bundle.instance_id.clone(),
                        text,
                        usage: Usage {
                            backend: "http".into(),
                            model: self.cfg.model_name.clone(),
                            attempts,
                            retries: attempts - 1,
                            token_estimate: bundle.token_estimate,
                            prompt_tokens,
                            completion_tokens,
                        },
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(e)) => {
                    if attempts > self.cfg.max_retries {
                        return Err(e);
                    }
                    let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    log::warn!("attempt {attempts} for {} failed: {e}; retrying in {delay} ms", bundle.instance_id);
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }
}

/// Canned responses keyed by instance id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubScript {
    pub format: String,
    pub version: u32,
    pub responses: BTreeMap<String, String>,
}

impl StubScript {
    pub fn new(responses: BTreeMap<String, String>) -> Self {
        Self {
            format: STUB_SCRIPT_FORMAT.into(),
            version: STUB_SCRIPT_VERSION,
            responses,
        }
    }
}

pub fn save_stub_script(s: &StubScript, path: &Path) -> Result<()> {
    std::fs::write(path, to_checked_json(s)?)
        .map_err(|e| ThesaurusError::Io(format!("{}: {e}", path.display())).into())
}

pub fn load_stub_script(path: &Path) -> Result<StubScript> {
    let text = std::fs::read_to_string(path).map_err(|e| ThesaurusError::Io(format!("{}: {e}", path.display())))?;
    Ok(from_checked_json(&text, STUB_SCRIPT_FORMAT, STUB_SCRIPT_VERSION)?)
}

/// Deterministic offline responders.
#[derive(Debug, Clone, PartialEq)]
pub enum StubMode {
    /// Returns the scripted text for the instance.
    Script(StubScript),
    /// Restates the ground-truth ranking of the instance.
    Echo(BTreeMap<String, Vec<(String, Sign)>>),
    /// Restates the ground-truth ranking in reverse order.
    Reversed(BTreeMap<String, Vec<(String, Sign)>>),
    /// Copies the ranking of the worked example from the same group, or of the
    /// first example; without examples it answers alphabetically.
    ShotCopy(Vec<String>),
    /// Lists every feature alphabetically, ignoring the prompt.
    Alphabetical(Vec<String>),
}

pub struct StubBackend {
    pub name: String,
    pub mode: StubMode,
    pub glossary: BTreeMap<String, String>,
}

impl StubBackend {
    pub fn new(name: impl Into<String>, mode: StubMode) -> Self {
        Self {
            name: name.into(),
            mode,
            glossary: BTreeMap::new(),
        }
    }

    pub fn with_glossary(mut self, glossary: BTreeMap<String, String>) -> Self {
        self.glossary = glossary;
        self
    }

    fn alphabetical(features: &[String]) -> Vec<(String, Sign)> {
        let mut f = features.to_vec();
        f.sort();
        f.into_iter().map(|n| (n, Sign::Plus)).collect()
    }

    fn respond(&self, bundle: &PromptBundle) -> Result<String> {
        let id = &bundle.instance_id;
        let ground = |m: &BTreeMap<String, Vec<(String, Sign)>>| {
            m.get(id).cloned().ok_or_else(|| LlmError::StubKeyMissing(id.clone()))
        };
        let ranking = match &self.mode {
            StubMode::Script(s) => {
                return s.responses.get(id).cloned().ok_or_else(|| LlmError::StubKeyMissing(id.clone()));
            }
            StubMode::Echo(m) => ground(m)?,
            StubMode::Reversed(m) => ground(m)?.into_iter().rev().collect(),
            StubMode::ShotCopy(features) => {
                let shot = bundle
                    .shots
                    .iter()
                    .find(|s| s.cluster_label == bundle.cluster_label)
                    .or(bundle.shots.first());
                match shot {
                    Some(s) => parse_response(&s.answer, features)?.technical_ranking,
                    None => Self::alphabetical(features),
                }
            }
            StubMode::Alphabetical(features) => Self::alphabetical(features),
        };
        Ok(render_answer(&ranking, &bundle.cluster_label, &self.glossary))
    }
}

impl LlmBackend for StubBackend {
    fn model_name(&self) -> String {
        self.name.clone()
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<Completion> {
        Ok(Completion {
            instance_id: bundle.instance_id.clone(),
            text: self.respond(bundle)?,
            usage: Usage {
                backend: "stub".into(),
                model: self.name.clone(),
                attempts: 1,
                retries: 0,
                token_estimate: bundle.token_estimate,
                prompt_tokens: None,
                completion_tokens: None,
            },
        })
    }
}
