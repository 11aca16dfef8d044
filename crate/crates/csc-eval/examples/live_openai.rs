//! Evaluates a real OpenAI-compatible endpoint on the bundled test split.
//! Needs two environment variables; without them it prints instructions and
//! exits cleanly so the example suite stays offline-safe.
//!
//!   CSC_EVAL_ENDPOINT  chat completions URL, e.g.
//!                      https://api.openai.com/v1/chat/completions
//!   CSC_EVAL_API_KEY   the bearer token for that endpoint
//!   CSC_EVAL_MODEL     optional model name, default gpt-3.5-turbo
//!
//! Run with: cargo run --example live_openai

use std::path::PathBuf;

use csc_eval::backend::{BackendConfig, BackendKind};
use csc_eval::runner::{run_eval, DatasetEntry, PromptSection, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = match std::env::var("CSC_EVAL_ENDPOINT") {
        Ok(url) => url,
        Err(_) => {
            println!("live run skipped: set CSC_EVAL_ENDPOINT and CSC_EVAL_API_KEY first,");
            println!("for example:");
            println!("  export CSC_EVAL_ENDPOINT=https://api.openai.com/v1/chat/completions");
            println!("  export CSC_EVAL_API_KEY=sk-...");
            println!("  cargo run --example live_openai");
            return Ok(());
        }
    };

    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = std::env::temp_dir().join("csc-eval-live");
    std::fs::create_dir_all(&out)?;

    let backend = BackendConfig {
        kind: BackendKind::HttpOpenAiCompatible,
        model_name: std::env::var("CSC_EVAL_MODEL").unwrap_or_else(|_| "gpt-3.5-turbo".to_string()),
        endpoint_url: Some(endpoint),
        api_key_env: Some("CSC_EVAL_API_KEY".to_string()),
        rate_limit: Some(2.0),
        ..BackendConfig::mock(BackendKind::HttpOpenAiCompatible)
    };

    let config = RunConfig {
        corpus: fixtures.join("corpus_small.tsv"),
        output_dir: out.clone(),
        workers: 2,
        seed: 0,
        strip_responses: true,
        template: "zh".to_string(),
        template_dir: None,
        datasets: vec![DatasetEntry {
            name: "small".to_string(),
            test: fixtures.join("test_small.tsv"),
            train: Some(fixtures.join("train_small.tsv")),
        }],
        backend,
        prompt: PromptSection::default(),
        sweep: None,
    };

    println!("querying {} sentence by sentence...", config.backend.model_name);
    let report = run_eval(&config)?;
    for cell in &report.cells {
        println!(
            "{} {} {}: detection F1 {:.1}, correction F1 {:.1}, {} failures",
            cell.dataset,
            cell.regime.name(),
            cell.features,
            cell.display.detection.f1,
            cell.display.correction.f1,
            cell.failure_count,
        );
    }
    println!("full report and replay log under {}", out.display());
    Ok(())
}
