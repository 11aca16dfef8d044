//! Sweeps the full regime-by-feature grid in one run and prints the cell
//! table. The echo backend returns every sentence unchanged, so the scores
//! show what a do-nothing model earns on each cell of the grid.
//!
//! Run with: cargo run --example ablation_sweep

use std::path::PathBuf;

use csc_eval::backend::{BackendConfig, BackendKind};
use csc_eval::runner::{run_eval, DatasetEntry, PromptSection, RunConfig, SweepSection};

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
        backend: BackendConfig::mock(BackendKind::MockEcho),
        prompt: PromptSection::default(),
        sweep: Some(SweepSection {
            regimes: Some(vec![
                "zero_shot".to_string(),
                "one_shot".to_string(),
                "few_shot".to_string(),
            ]),
            feature_sets: Some(vec![
                vec![],
                vec!["phonetic".to_string()],
                vec!["radical".to_string()],
                vec!["phonetic".to_string(), "radical".to_string()],
            ]),
        }),
    };

    let report = run_eval(&config)?;
    println!("{} cells:", report.cells.len());
    println!("regime\tfeatures\tdet_f1\tcorr_f1\treplay_log");
    for cell in &report.cells {
        println!(
            "{}\t{}\t{:.1}\t{:.1}\t{}",
            cell.regime.name(),
            cell.features,
            cell.display.detection.f1,
            cell.display.correction.f1,
            cell.replay_log,
        );
    }
    println!("\nreport.json and report.csv written to {}", out.path().display());
    Ok(())
}
