//! Every run streams one JSONL record per sentence (transcript, raw and
//! stripped response, latency). This example finishes a run, then re-scores
//! it purely from that log and checks the numbers match exactly, which is
//! what makes reported metrics auditable after the fact.
//!
//! Run with: cargo run --example replay_rescore

use std::path::PathBuf;

use csc_eval::backend::{BackendConfig, BackendKind};
use csc_eval::dataset::{Dataset, Split};
use csc_eval::replay::{load_log, replay_score};
use csc_eval::runner::{run_eval, DatasetEntry, PromptSection, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = tempfile::tempdir()?;

    let config = RunConfig {
        corpus: fixtures.join("corpus_small.tsv"),
        output_dir: out.path().to_path_buf(),
        workers: 4,
        seed: 0,
        strip_responses: true,
        template: "zh".to_string(),
        template_dir: None,
        datasets: vec![DatasetEntry {
            name: "small".to_string(),
            test: fixtures.join("test_small.tsv"),
            train: Some(fixtures.join("train_small.tsv")),
        }],
        backend: BackendConfig::mock(BackendKind::MockGold),
        prompt: PromptSection::default(),
        sweep: None,
    };

    let report = run_eval(&config)?;
    let cell = &report.cells[0];
    let log_path = out.path().join(&cell.replay_log);

    let records = load_log(&log_path)?;
    println!("log {} holds {} records; first record:", cell.replay_log, records.len());
    let first = records.iter().min_by(|a, b| a.id.cmp(&b.id)).unwrap();
    println!("  id: {}", first.id);
    println!("  query: {}", first.transcript.query_sentence);
    println!("  raw response: {}", first.raw_response);
    println!("  latency: {} ms", first.latency_ms);

    let dataset = Dataset::load(fixtures.join("test_small.tsv"), "small", Split::Test)?;
    let rescored = replay_score(&log_path, &dataset)?;
    assert_eq!(rescored, cell.metrics, "replay must reproduce the run exactly");
    println!("\nre-scored from the log, matching the live run bit for bit:");
    println!("{}", serde_json::to_string_pretty(&rescored)?);
    Ok(())
}
