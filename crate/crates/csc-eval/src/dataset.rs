//! Parallel spell-checking datasets: aligned source/gold sentence pairs with
//! summary statistics and deterministic in-context exemplar selection.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One aligned sentence pair: the possibly-misspelled source and its gold
/// correction, equal in character count by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub id: String,
    pub source: String,
    pub gold: String,
}

impl SentencePair {
    /// Character indices (0-based) where source and gold disagree.
    pub fn error_positions(&self) -> BTreeSet<usize> {
        differing_positions(&self.source, &self.gold)
    }

    pub fn is_erroneous(&self) -> bool {
        self.source
            .chars()
            .zip(self.gold.chars())
            .any(|(s, g)| s != g)
    }
}

/// Character indices (0-based) where two equal-length sentences disagree.
pub fn differing_positions(a: &str, b: &str) -> BTreeSet<usize> {
    a.chars()
        .zip(b.chars())
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pairs: Vec<SentencePair>,
}

/// Summary statistics over a dataset's source sentences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub sentence_count: usize,
    /// Mean source length in characters; 0.0 for an empty dataset.
    pub avg_length: f64,
    /// Total differing positions summed over all pairs.
    pub error_count: usize,
    pub erroneous_sentence_count: usize,
}

impl Dataset {
    /// Loads a "source<TAB>gold" file. Lines starting with '#' and blank
    /// lines are skipped; every remaining row must be a length-aligned pair.
    /// Pair ids are the 1-based pair ordinal, zero-padded to five digits.
    pub fn load<P: AsRef<Path>>(path: P, name: &str, split: Split) -> Result<Dataset, DatasetError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DatasetError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Dataset::parse(&text, name, split)
    }

    /// Parses dataset text; see [`Dataset::load`] for the format.
    pub fn parse(text: &str, name: &str, split: Split) -> Result<Dataset, DatasetError> {
        if name.is_empty() {
            return Err(DatasetError::EmptyName);
        }
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split('\t');
            let (source, gold) = match (fields.next(), fields.next(), fields.next()) {
                (Some(s), Some(g), None) => (s, g),
                _ => {
                    return Err(DatasetError::MalformedRow {
                        line,
                        reason: "expected exactly two tab-separated sentences".to_string(),
                    })
                }
            };
            if source.is_empty() || gold.is_empty() {
                return Err(DatasetError::MalformedRow {
                    line,
                    reason: "sentences must be non-empty".to_string(),
                });
            }
            let len_source = source.chars().count();
            let len_gold = gold.chars().count();
            if len_source != len_gold {
                return Err(DatasetError::LengthMismatch {
                    line,
                    len_source,
                    len_gold,
                });
            }
            pairs.push(SentencePair {
                id: format!("{:05}", pairs.len() + 1),
                source: source.to_string(),
                gold: gold.to_string(),
            });
        }
        Ok(Dataset {
            name: name.to_string(),
            split,
            pairs,
        })
    }

    pub fn from_pairs(name: &str, split: Split, pairs: Vec<SentencePair>) -> Dataset {
        Dataset {
            name: name.to_string(),
            split,
            pairs,
        }
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SentencePair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    pub fn stats(&self) -> DatasetStats {
        let sentence_count = self.pairs.len();
        let char_total: usize = self.pairs.iter().map(|p| p.source.chars().count()).sum();
        let error_count: usize = self.pairs.iter().map(|p| p.error_positions().len()).sum();
        let erroneous_sentence_count = self.pairs.iter().filter(|p| p.is_erroneous()).count();
        DatasetStats {
            sentence_count,
            avg_length: if sentence_count == 0 {
                0.0
            } else {
                char_total as f64 / sentence_count as f64
            },
            error_count,
            erroneous_sentence_count,
        }
    }
}

/// Which exemplar slot a selected pair fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExemplarKind {
    /// Every error swaps characters that share a tone-stripped phonetic.
    Phonetic,
    /// Every error swaps characters that share a radical (and the pair is
    /// not already phonetic).
    Glyph,
    /// No errors at all.
    Correct,
}

impl ExemplarKind {
    pub fn name(self) -> &'static str {
        match self {
            ExemplarKind::Phonetic => "phonetic",
            ExemplarKind::Glyph => "glyph",
            ExemplarKind::Correct => "correct",
        }
    }
}

impl fmt::Display for ExemplarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three in-context exemplars, in presentation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exemplars {
    pub phonetic: SentencePair,
    pub glyph: SentencePair,
    pub correct: SentencePair,
}

impl Exemplars {
    pub fn into_vec(self) -> Vec<SentencePair> {
        vec![self.phonetic, self.glyph, self.correct]
    }

    pub fn ids(&self) -> [&str; 3] {
        [&self.phonetic.id, &self.glyph.id, &self.correct.id]
    }
}

/// Picks one phonetic-error pair, one glyph-error pair, and one error-free
/// pair: the first qualifying pair in dataset order for each slot. A pair
/// fills at most one slot.
pub fn select_exemplars(train: &Dataset, corpus: &Corpus) -> Result<Exemplars, DatasetError> {
    let mut phonetic: Option<&SentencePair> = None;
    let mut glyph: Option<&SentencePair> = None;
    let mut correct: Option<&SentencePair> = None;
    for pair in train.pairs() {
        let positions = pair.error_positions();
        if positions.is_empty() {
            correct.get_or_insert(pair);
            continue;
        }
        if all_errors_share_phonetic(pair, &positions, corpus) {
            phonetic.get_or_insert(pair);
        } else if all_errors_share_radical(pair, &positions, corpus) {
            glyph.get_or_insert(pair);
        }
        if phonetic.is_some() && glyph.is_some() && correct.is_some() {
            break;
        }
    }
    let missing = |kind| DatasetError::NoQualifyingExemplar { kind };
    Ok(Exemplars {
        phonetic: phonetic.ok_or_else(|| missing(ExemplarKind::Phonetic))?.clone(),
        glyph: glyph.ok_or_else(|| missing(ExemplarKind::Glyph))?.clone(),
        correct: correct.ok_or_else(|| missing(ExemplarKind::Correct))?.clone(),
    })
}

fn all_errors_share_phonetic(pair: &SentencePair, positions: &BTreeSet<usize>, corpus: &Corpus) -> bool {
    chars_at(pair, positions).all(|(s, g)| {
        match (phonetic_key(corpus, s), phonetic_key(corpus, g)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    })
}

fn all_errors_share_radical(pair: &SentencePair, positions: &BTreeSet<usize>, corpus: &Corpus) -> bool {
    chars_at(pair, positions).all(|(s, g)| {
        let rad = |ch| corpus.lookup(ch).and_then(|r| r.radical);
        match (rad(s), rad(g)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    })
}

fn chars_at<'a>(
    pair: &'a SentencePair,
    positions: &'a BTreeSet<usize>,
) -> impl Iterator<Item = (char, char)> + 'a {
    pair.source
        .chars()
        .zip(pair.gold.chars())
        .enumerate()
        .filter(|(i, _)| positions.contains(i))
        .map(|(_, pair)| pair)
}

fn phonetic_key(corpus: &Corpus, ch: char) -> Option<String> {
    let raw = corpus.lookup(ch)?.phonetic.clone()?;
    let stripped = strip_tone_marks(&raw);
    if stripped.is_empty() {
        None
    } else {
        Some(stripped)
    }
}

/// Normalizes a pinyin string for toneless comparison: lowercases, folds
/// tone-marked vowels to their base letter (ǔ -> u, ǜ -> ü), drops combining
/// diacritics, and drops trailing tone digits (wu3 -> wu).
pub fn strip_tone_marks(pinyin: &str) -> String {
    let mut out = String::new();
    for ch in pinyin.trim().chars().flat_map(char::to_lowercase) {
        let folded = match ch {
            'ā' | 'á' | 'ǎ' | 'à' => 'a',
            'ē' | 'é' | 'ě' | 'è' | 'ê' => 'e',
            'ī' | 'í' | 'ǐ' | 'ì' => 'i',
            'ō' | 'ó' | 'ǒ' | 'ò' => 'o',
            'ū' | 'ú' | 'ǔ' | 'ù' => 'u',
            'ǖ' | 'ǘ' | 'ǚ' | 'ǜ' => 'ü',
            'ń' | 'ň' | 'ǹ' => 'n',
            'ḿ' => 'm',
            '\u{0300}'..='\u{036f}' => continue,
            other => other,
        };
        out.push(folded);
    }
    while out.ends_with(['1', '2', '3', '4', '5']) {
        out.pop();
    }
    out
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: source has {len_source} characters but gold has {len_gold}")]
    LengthMismatch {
        line: usize,
        len_source: usize,
        len_gold: usize,
    },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("dataset name must be non-empty")]
    EmptyName,
    #[error("no qualifying {kind} exemplar in the training split")]
    NoQualifyingExemplar { kind: ExemplarKind },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
