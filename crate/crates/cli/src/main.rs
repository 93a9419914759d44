//! `hcx`: explainable clustering from raw wearable data to scored LLM explanations.

mod backends;
mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hcx_core::pipeline::PipelineError;

#[derive(Debug, Parser)]
#[command(name = "hcx", version, about = "Explainable clustering with LLM-ready context")]
struct Cli {
    /// Worker threads for parallel stages (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, aggregate, impute, encode and normalize a CSV into dataset variants.
    Preprocess(commands::PreprocessArgs),
    /// Run every clustering algorithm on every variant and pick a winner.
    Benchmark(commands::BenchmarkArgs),
    /// Refine the winner and package context, surrogate and exemplars.
    Thesaurus(commands::ThesaurusArgs),
    /// Explain one instance through a prompt and an LLM backend.
    Explain(commands::ExplainArgs),
    /// Score a batch of explanations for structure and content quality.
    Evaluate(commands::EvaluateArgs),
    /// Generate synthetic data and run the full pipeline with a stub backend.
    Demo(commands::DemoArgs),
}

/// Options shared by the commands that talk to an LLM.
#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// TOML file with an `[llm]` table (endpoint, model, retries, ...).
    #[arg(long)]
    pub llm_config: Option<std::path::PathBuf>,
    /// Scripted responses for the `script` backend.
    #[arg(long)]
    pub stub_script: Option<std::path::PathBuf>,
    /// Concurrent requests per batch.
    #[arg(long)]
    pub concurrency: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return fail(PipelineError::Config("--jobs must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::Thesaurus(a) => commands::thesaurus(&a),
        Command::Explain(a) => commands::explain(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Demo(a) => commands::demo(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: PipelineError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
