use std::path::Path;

use serde::Deserialize;

use hcx_core::data::Dataset;
use hcx_core::llm::{load_stub_script, BackendKind, HttpBackend, LlmBackend, LlmConfig, StubBackend, StubMode};
use hcx_core::pipeline::{ground_map, PipelineError, Result};
use hcx_core::Thesaurus;

use crate::BackendArgs;

pub const BACKEND_NAMES: [&str; 6] = ["echo", "reversed", "shot-copy", "alphabetical", "script", "http"];

#[derive(Debug, Default, Deserialize)]
struct LlmFile {
    #[serde(default)]
    llm: LlmConfig,
}

pub fn llm_config(args: &BackendArgs) -> Result<LlmConfig> {
    let mut cfg = match &args.llm_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
            toml::from_str::<LlmFile>(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
                .llm
        }
        None => LlmConfig::default(),
    };
    if let Some(c) = args.concurrency {
        cfg.concurrency = c;
    }
    cfg.validate().map_err(PipelineError::from)?;
    Ok(cfg)
}

fn script_path(args: &BackendArgs) -> Result<&Path> {
    args.stub_script
        .as_deref()
        .ok_or_else(|| PipelineError::Config("the script backend needs --stub-script".into()))
}

/// Builds a backend by name; `ids` are the instances the echo and reversed
/// stubs must know the ground truth for.
pub fn make_backend(
    name: &str,
    t: &Thesaurus,
    ds: &Dataset,
    ids: &[String],
    args: &BackendArgs,
) -> Result<Box<dyn LlmBackend>> {
    let glossary = t.glossary.clone();
    let stub = |label: &str, mode: StubMode| -> Box<dyn LlmBackend> {
        Box::new(StubBackend::new(format!("{label}-stub"), mode).with_glossary(glossary.clone()))
    };
    Ok(match name {
        "echo" => stub("echo", StubMode::Echo(ground_map(t, ds, ids)?)),
        "reversed" => stub("reversed", StubMode::Reversed(ground_map(t, ds, ids)?)),
        "shot-copy" => stub("shot-copy", StubMode::ShotCopy(t.feature_names())),
        "alphabetical" => stub("alphabetical", StubMode::Alphabetical(t.feature_names())),
        "script" => {
            let path = script_path(args)?;
            if !path.exists() {
                return Err(PipelineError::Config(format!("stub script {} does not exist", path.display())));
            }
            stub("script", StubMode::Script(load_stub_script(path)?))
        }
        "http" => {
            let cfg = LlmConfig {
                backend: BackendKind::Http,
                ..llm_config(args)?
            };
            Box::new(HttpBackend::new(&cfg)?)
        }
        other => {
            return Err(PipelineError::Config(format!(
                "unknown backend `{other}` (expected one of {})",
                BACKEND_NAMES.join(", ")
            )))
        }
    })
}
