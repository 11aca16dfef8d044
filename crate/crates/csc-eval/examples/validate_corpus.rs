//! Loads the bundled character corpus, prints coverage counts, and shows how
//! validation reports malformed rows.
//!
//! Run with: cargo run --example validate_corpus

use std::path::PathBuf;

use csc_eval::corpus::{validate_corpus_file, Attribute, Corpus, CORPUS_COLUMNS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus_small.tsv");

    let corpus = Corpus::load(&path)?;
    let counts = corpus.counts();
    println!("loaded {} characters from {}", corpus.len(), path.display());
    println!("  primary tier:   {}", counts.primary);
    println!("  secondary tier: {}", counts.secondary);

    println!("\nattribute coverage:");
    for attr in Attribute::ALL {
        let covered = corpus
            .records()
            .filter(|r| r.attribute(attr).is_some())
            .count();
        println!("  {:<18} {}/{}", attr.name(), covered, corpus.len());
    }

    // validation collects every violation instead of stopping at the first
    let dir = tempfile::tempdir()?;
    let bad = dir.path().join("bad.tsv");
    std::fs::write(
        &bad,
        format!(
            "{}\n\
             海\thǎi\t\t氵\t10\t7\t\t左右\tU+6D78\t\t\t\t\tprimary\n\
             河\thé\t\t氵\t8\t12\t\t左右\tU+6CB3\t\t\t\t\tprimary\n",
            CORPUS_COLUMNS.join("\t")
        ),
    )?;
    let report = validate_corpus_file(&bad)?;
    println!(
        "\nseeded file: {} rows, {} valid, {} violations",
        report.rows,
        report.valid,
        report.violations.len()
    );
    for violation in &report.violations {
        println!("  {violation}");
    }
    Ok(())
}
