//! Prints sentence and error statistics for the bundled datasets, and shows
//! how error positions are derived from an aligned pair.
//!
//! Run with: cargo run --example dataset_stats

use std::path::PathBuf;

use csc_eval::dataset::{Dataset, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    println!("dataset\tsentences\tavg_length\terrors\terroneous");
    for (name, file, split) in [
        ("train-small", "train_small.tsv", Split::Train),
        ("test-small", "test_small.tsv", Split::Test),
        ("stats-six", "stats_six.tsv", Split::Test),
    ] {
        let dataset = Dataset::load(fixtures.join(file), name, split)?;
        let stats = dataset.stats();
        println!(
            "{name}\t{}\t{:.1}\t{}\t{}",
            stats.sentence_count,
            stats.avg_length,
            stats.error_count,
            stats.erroneous_sentence_count
        );
    }

    let dataset = Dataset::load(fixtures.join("test_small.tsv"), "test-small", Split::Test)?;
    println!("\nper-sentence error positions (0-based):");
    for pair in dataset.pairs() {
        println!(
            "  {}  {} -> {}  positions {:?}",
            pair.id,
            pair.source,
            pair.gold,
            pair.error_positions()
        );
    }
    Ok(())
}
