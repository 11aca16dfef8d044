//! Runs the full evaluation pipeline end to end with an offline backend that
//! always answers the gold sentence, then prints the resulting report. Useful
//! as a wiring check before pointing the harness at a real API.
//!
//! Run with: cargo run --example mock_run

use std::path::PathBuf;

use csc_eval::backend::{BackendConfig, BackendKind};
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
    println!("backend: {} ({})", report.meta.backend_kind, report.meta.model_name);
    println!("dataset\tregime\tfeatures\tdet_f1\tcorr_f1\tlen_ok\tfailures");
    for cell in &report.cells {
        println!(
            "{}\t{}\t{}\t{:.1}\t{:.1}\t{}/{}\t{}",
            cell.dataset,
            cell.regime.name(),
            cell.features,
            cell.display.detection.f1,
            cell.display.correction.f1,
            cell.metrics.length_unchanged_count,
            cell.metrics.sentence_count,
            cell.failure_count,
        );
    }
    println!("\nartifacts under {}:", out.path().display());
    for entry in std::fs::read_dir(out.path())? {
        println!("  {}", entry?.file_name().to_string_lossy());
    }
    Ok(())
}
