//! Builds chat transcripts for all three prompting regimes and prints the
//! few-shot one. Exemplars are picked automatically from the training split:
//! a phonetic confusion, a glyph confusion, and an error-free sentence.
//!
//! Run with: cargo run --example render_prompt

use std::path::PathBuf;

use csc_eval::corpus::{Attribute, Corpus, FeatureSet};
use csc_eval::dataset::{select_exemplars, Dataset, Split};
use csc_eval::prompt::{PromptBuilder, PromptConfig, Regime, TemplateStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let corpus = Corpus::load(fixtures.join("corpus_small.tsv"))?;
    let templates = TemplateStore::builtin();
    let builder = PromptBuilder::new(&corpus, &templates);

    let train = Dataset::load(fixtures.join("train_small.tsv"), "train", Split::Train)?;
    let picked = select_exemplars(&train, &corpus)?;
    println!("selected exemplars:");
    for (slot, pair) in [
        ("phonetic", &picked.phonetic),
        ("glyph", &picked.glyph),
        ("correct", &picked.correct),
    ] {
        println!("  {slot}: {} -> {}", pair.source, pair.gold);
    }
    let exemplars = picked.into_vec();

    let sentence = "希望你们好好的跳无";
    for regime in Regime::ALL {
        let config = PromptConfig {
            regime,
            features: FeatureSet::new([Attribute::Phonetic, Attribute::Radical]),
            exemplars: exemplars[..regime.exemplar_count()].to_vec(),
            template_id: "zh".to_string(),
        };
        let transcript = builder.build_transcript(sentence, &config)?;
        println!("\n{} -> {} turns", regime.name(), transcript.turns.len());
        if regime == Regime::FewShot {
            println!("\n{}", transcript.render_text());
        }
    }
    Ok(())
}
