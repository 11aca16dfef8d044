//! The rich-semantic character database: per-character phonetic, glyph, and
//! input-coding attributes for GB2312 simplified Chinese, loaded from TSV.
//!
//! The database is immutable after load and safe to share across worker
//! threads. Lookups are total: characters outside the corpus (including
//! non-Chinese text) return `None` rather than an error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// GB2312 frequency tier of a character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Primary,
    Secondary,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Primary => "primary",
            Tier::Secondary => "secondary",
        }
    }

    fn parse(s: &str) -> Option<Tier> {
        match s {
            "primary" => Some(Tier::Primary),
            "secondary" => Some(Tier::Secondary),
            _ => None,
        }
    }
}

/// One attribute column of the character database.
///
/// The variant order matches the TSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    Phonetic,
    PhoneticNotation,
    Radical,
    Strokes,
    OutsideStrokes,
    StrokeOrder,
    Structure,
    UnicodePoint,
    WubiCode,
    CangjieCode,
    ZhengCode,
    FourCornerCode,
}

impl Attribute {
    pub const ALL: [Attribute; 12] = [
        Attribute::Phonetic,
        Attribute::PhoneticNotation,
        Attribute::Radical,
        Attribute::Strokes,
        Attribute::OutsideStrokes,
        Attribute::StrokeOrder,
        Attribute::Structure,
        Attribute::UnicodePoint,
        Attribute::WubiCode,
        Attribute::CangjieCode,
        Attribute::ZhengCode,
        Attribute::FourCornerCode,
    ];

    /// The identifier used in file headers, feature lists, and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Phonetic => "phonetic",
            Attribute::PhoneticNotation => "phonetic_notation",
            Attribute::Radical => "radical",
            Attribute::Strokes => "strokes",
            Attribute::OutsideStrokes => "outside_strokes",
            Attribute::StrokeOrder => "stroke_order",
            Attribute::Structure => "structure",
            Attribute::UnicodePoint => "unicode_point",
            Attribute::WubiCode => "wubi_code",
            Attribute::CangjieCode => "cangjie_code",
            Attribute::ZhengCode => "zheng_code",
            Attribute::FourCornerCode => "four_corner_code",
        }
    }

    pub fn parse(name: &str) -> Result<Attribute, CorpusError> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| CorpusError::UnknownFeature(name.to_string()))
    }

    /// The feature category this attribute belongs to.
    pub fn category(self) -> FeatureCategory {
        match self {
            Attribute::Phonetic | Attribute::PhoneticNotation | Attribute::ZhengCode => {
                FeatureCategory::Phonetic
            }
            Attribute::Radical
            | Attribute::Strokes
            | Attribute::OutsideStrokes
            | Attribute::Structure => FeatureCategory::Glyph,
            Attribute::StrokeOrder
            | Attribute::CangjieCode
            | Attribute::UnicodePoint
            | Attribute::WubiCode
            | Attribute::FourCornerCode => FeatureCategory::InputCoding,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Three-way taxonomy over the character attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureCategory {
    Phonetic,
    Glyph,
    InputCoding,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 3] = [
        FeatureCategory::Phonetic,
        FeatureCategory::Glyph,
        FeatureCategory::InputCoding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureCategory::Phonetic => "phonetic",
            FeatureCategory::Glyph => "glyph",
            FeatureCategory::InputCoding => "input_coding",
        }
    }

    pub fn members(self) -> &'static [Attribute] {
        match self {
            FeatureCategory::Phonetic => &[
                Attribute::Phonetic,
                Attribute::PhoneticNotation,
                Attribute::ZhengCode,
            ],
            FeatureCategory::Glyph => &[
                Attribute::Radical,
                Attribute::Strokes,
                Attribute::OutsideStrokes,
                Attribute::Structure,
            ],
            FeatureCategory::InputCoding => &[
                Attribute::StrokeOrder,
                Attribute::CangjieCode,
                Attribute::UnicodePoint,
                Attribute::WubiCode,
                Attribute::FourCornerCode,
            ],
        }
    }
}

/// An ordered set of attributes, used to pick what goes into an annotation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureSet(BTreeSet<Attribute>);

impl FeatureSet {
    pub fn empty() -> FeatureSet {
        FeatureSet(BTreeSet::new())
    }

    pub fn new<I: IntoIterator<Item = Attribute>>(attrs: I) -> FeatureSet {
        FeatureSet(attrs.into_iter().collect())
    }

    /// Parses a list of attribute identifiers.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<FeatureSet, CorpusError> {
        let mut set = BTreeSet::new();
        for name in names {
            set.insert(Attribute::parse(name.as_ref())?);
        }
        Ok(FeatureSet(set))
    }

    /// Parses a feature list separated by commas or plus signs, so rendered
    /// sets like "phonetic+radical" round-trip; "" and "none" mean empty.
    pub fn parse(list: &str) -> Result<FeatureSet, CorpusError> {
        let list = list.trim();
        if list.is_empty() || list == "none" {
            return Ok(FeatureSet::empty());
        }
        let names: Vec<&str> = list.split([',', '+']).map(str::trim).collect();
        FeatureSet::from_names(&names)
    }

    pub fn contains(&self, attr: Attribute) -> bool {
        self.0.contains(&attr)
    }

    pub fn iter(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.0.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_subset(&self, other: &FeatureSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.iter().map(Attribute::name).collect()
    }
}

impl FromIterator<Attribute> for FeatureSet {
    fn from_iter<I: IntoIterator<Item = Attribute>>(iter: I) -> FeatureSet {
        FeatureSet(iter.into_iter().collect())
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        f.write_str(&self.names().join("+"))
    }
}

/// All rich-semantic attributes of one Chinese character.
///
/// Only `character`, `unicode_point`, and `tier` are mandatory; the collected
/// data is known to be incomplete for some characters, so every other field
/// is optional and annotation falls back to an explicit placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterRecord {
    pub character: char,
    pub phonetic: Option<String>,
    pub phonetic_notation: Option<String>,
    pub radical: Option<char>,
    pub strokes: Option<u32>,
    pub outside_strokes: Option<u32>,
    /// One symbol per stroke, in writing order.
    pub stroke_order: Option<String>,
    /// Composition label, e.g. left-right / top-bottom / enclosing.
    pub structure: Option<String>,
    /// Canonical "U+XXXX" form of `character`'s code point.
    pub unicode_point: String,
    pub wubi_code: Option<String>,
    pub cangjie_code: Option<String>,
    pub zheng_code: Option<String>,
    pub four_corner_code: Option<String>,
    pub tier: Tier,
}

impl CharacterRecord {
    /// Canonical code point rendering, e.g. 海 -> "U+6D77".
    pub fn canonical_unicode_point(ch: char) -> String {
        format!("U+{:04X}", ch as u32)
    }

    /// Uniform string access to any attribute; `None` when the data is absent.
    pub fn attribute(&self, attr: Attribute) -> Option<String> {
        match attr {
            Attribute::Phonetic => self.phonetic.clone(),
            Attribute::PhoneticNotation => self.phonetic_notation.clone(),
            Attribute::Radical => self.radical.map(String::from),
            Attribute::Strokes => self.strokes.map(|n| n.to_string()),
            Attribute::OutsideStrokes => self.outside_strokes.map(|n| n.to_string()),
            Attribute::StrokeOrder => self.stroke_order.clone(),
            Attribute::Structure => self.structure.clone(),
            Attribute::UnicodePoint => Some(self.unicode_point.clone()),
            Attribute::WubiCode => self.wubi_code.clone(),
            Attribute::CangjieCode => self.cangjie_code.clone(),
            Attribute::ZhengCode => self.zheng_code.clone(),
            Attribute::FourCornerCode => self.four_corner_code.clone(),
        }
    }

    fn check_invariants(&self, line: usize) -> Result<(), CorpusError> {
        let violation = |field: &str, reason: String| CorpusError::InvariantViolation {
            line,
            character: self.character,
            field: field.to_string(),
            reason,
        };
        if self.unicode_point != Self::canonical_unicode_point(self.character) {
            return Err(violation(
                "unicode_point",
                format!(
                    "expected {}, found {}",
                    Self::canonical_unicode_point(self.character),
                    self.unicode_point
                ),
            ));
        }
        if let Some(strokes) = self.strokes {
            if strokes == 0 {
                return Err(violation("strokes", "stroke count must be positive".into()));
            }
            if let Some(outside) = self.outside_strokes {
                if outside > strokes {
                    return Err(violation(
                        "outside_strokes",
                        format!("{outside} exceeds total strokes {strokes}"),
                    ));
                }
            }
            if let Some(order) = &self.stroke_order {
                let symbols = order.chars().count() as u32;
                if symbols != strokes {
                    return Err(violation(
                        "stroke_order",
                        format!("{symbols} symbols but {strokes} strokes"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Record counts broken down by tier; always recomputable from the records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusCounts {
    pub total: usize,
    pub primary: usize,
    pub secondary: usize,
}

/// Requested attribute values for one character of an annotated sentence.
///
/// `values` follows the feature set's canonical order; `None` marks an
/// unknown value (character not in the corpus, or attribute not collected).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub character: char,
    pub values: Vec<(Attribute, Option<String>)>,
}

/// The loaded character database.
#[derive(Debug, Clone)]
pub struct Corpus {
    records: BTreeMap<char, CharacterRecord>,
    source_path: PathBuf,
    counts: CorpusCounts,
}

pub const CORPUS_COLUMNS: [&str; 14] = [
    "character",
    "phonetic",
    "phonetic_notation",
    "radical",
    "strokes",
    "outside_strokes",
    "stroke_order",
    "structure",
    "unicode_point",
    "wubi_code",
    "cangjie_code",
    "zheng_code",
    "four_corner_code",
    "tier",
];

impl Corpus {
    /// Loads a corpus TSV, rejecting the file on the first violation.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Corpus, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut records = BTreeMap::new();
        for row in parse_rows(&text) {
            let (line, record) = row?;
            record.check_invariants(line)?;
            if records.contains_key(&record.character) {
                return Err(CorpusError::DuplicateCharacter {
                    line,
                    character: record.character,
                });
            }
            records.insert(record.character, record);
        }
        let counts = compute_counts(&records);
        Ok(Corpus {
            records,
            source_path: path.to_path_buf(),
            counts,
        })
    }

    /// Builds a corpus from in-memory records (test and tooling convenience).
    pub fn from_records<I: IntoIterator<Item = CharacterRecord>>(
        iter: I,
    ) -> Result<Corpus, CorpusError> {
        let mut records = BTreeMap::new();
        for record in iter {
            record.check_invariants(0)?;
            if records.contains_key(&record.character) {
                return Err(CorpusError::DuplicateCharacter {
                    line: 0,
                    character: record.character,
                });
            }
            records.insert(record.character, record);
        }
        let counts = compute_counts(&records);
        Ok(Corpus {
            records,
            source_path: PathBuf::from("<memory>"),
            counts,
        })
    }

    /// Total lookup: `None` for out-of-corpus and non-Chinese characters.
    pub fn lookup(&self, ch: char) -> Option<&CharacterRecord> {
        self.records.get(&ch)
    }

    /// Annotates every character of `sentence`, in order, with the requested
    /// attributes. Output length always equals the sentence's character count.
    pub fn annotate_sentence(&self, sentence: &str, features: &FeatureSet) -> Vec<Annotation> {
        sentence
            .chars()
            .map(|ch| {
                let record = self.lookup(ch);
                let values = features
                    .iter()
                    .map(|attr| (attr, record.and_then(|r| r.attribute(attr))))
                    .collect();
                Annotation {
                    character: ch,
                    values,
                }
            })
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &CharacterRecord> {
        self.records.values()
    }

    pub fn counts(&self) -> CorpusCounts {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }
}

fn compute_counts(records: &BTreeMap<char, CharacterRecord>) -> CorpusCounts {
    let primary = records
        .values()
        .filter(|r| r.tier == Tier::Primary)
        .count();
    CorpusCounts {
        total: records.len(),
        primary,
        secondary: records.len() - primary,
    }
}

/// Result of validating a corpus file without stopping at the first error.
#[derive(Debug)]
pub struct ValidationReport {
    /// Data rows inspected (header and blank lines excluded).
    pub rows: usize,
    /// Rows that passed every check.
    pub valid: usize,
    pub violations: Vec<CorpusError>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every row of a corpus file and reports all violations.
pub fn validate_corpus_file<P: AsRef<Path>>(path: P) -> Result<ValidationReport, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut seen: BTreeSet<char> = BTreeSet::new();
    let mut rows = 0;
    let mut valid = 0;
    let mut violations = Vec::new();
    for row in parse_rows(&text) {
        rows += 1;
        match row {
            Ok((line, record)) => {
                let mut ok = true;
                if let Err(e) = record.check_invariants(line) {
                    violations.push(e);
                    ok = false;
                }
                if !seen.insert(record.character) {
                    violations.push(CorpusError::DuplicateCharacter {
                        line,
                        character: record.character,
                    });
                    ok = false;
                }
                if ok {
                    valid += 1;
                }
            }
            Err(e) => violations.push(e),
        }
    }
    Ok(ValidationReport {
        rows,
        valid,
        violations,
    })
}

/// Iterator over parsed data rows; the header is consumed and checked first.
fn parse_rows(text: &str) -> impl Iterator<Item = Result<(usize, CharacterRecord), CorpusError>> + '_ {
    let mut lines = text.lines().enumerate();
    let header_error = match lines.next() {
        Some((_, header)) => {
            let names: Vec<&str> = header.split('\t').collect();
            if names == CORPUS_COLUMNS {
                None
            } else {
                Some(CorpusError::MalformedRow {
                    line: 1,
                    reason: format!(
                        "header must name the columns: {}",
                        CORPUS_COLUMNS.join(", ")
                    ),
                })
            }
        }
        None => Some(CorpusError::MalformedRow {
            line: 1,
            reason: "file is empty; a header line is required".to_string(),
        }),
    };
    let mut header_error = header_error.map(Err);
    std::iter::from_fn(move || {
        if let Some(err) = header_error.take() {
            return Some(err);
        }
        for (idx, raw) in lines.by_ref() {
            if raw.trim().is_empty() {
                continue;
            }
            return Some(parse_row(idx + 1, raw));
        }
        None
    })
}

fn parse_row(line: usize, raw: &str) -> Result<(usize, CharacterRecord), CorpusError> {
    let malformed = |reason: String| CorpusError::MalformedRow { line, reason };
    let cells: Vec<&str> = raw.split('\t').collect();
    if cells.len() != CORPUS_COLUMNS.len() {
        return Err(malformed(format!(
            "expected {} columns, found {}",
            CORPUS_COLUMNS.len(),
            cells.len()
        )));
    }
    let character = single_char(cells[0])
        .ok_or_else(|| malformed(format!("character cell must be exactly one character, found {:?}", cells[0])))?;

    let violation = |field: &str, reason: String| CorpusError::InvariantViolation {
        line,
        character,
        field: field.to_string(),
        reason,
    };
    let opt = |cell: &str| {
        if cell.is_empty() {
            None
        } else {
            Some(cell.to_string())
        }
    };
    let radical = match cells[3] {
        "" => None,
        cell => Some(
            single_char(cell)
                .ok_or_else(|| violation("radical", format!("must be one character, found {cell:?}")))?,
        ),
    };
    let parse_count = |field: &str, cell: &str| -> Result<Option<u32>, CorpusError> {
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse::<u32>()
            .map(Some)
            .map_err(|_| violation(field, format!("not a non-negative integer: {cell:?}")))
    };
    let strokes = parse_count("strokes", cells[4])?;
    let outside_strokes = parse_count("outside_strokes", cells[5])?;
    if cells[8].is_empty() {
        return Err(violation("unicode_point", "value is required".into()));
    }
    let tier = Tier::parse(cells[13])
        .ok_or_else(|| violation("tier", format!("must be primary or secondary, found {:?}", cells[13])))?;

    let record = CharacterRecord {
        character,
        phonetic: opt(cells[1]),
        phonetic_notation: opt(cells[2]),
        radical,
        strokes,
        outside_strokes,
        stroke_order: opt(cells[6]),
        structure: opt(cells[7]),
        unicode_point: cells[8].to_string(),
        wubi_code: opt(cells[9]),
        cangjie_code: opt(cells[10]),
        zheng_code: opt(cells[11]),
        four_corner_code: opt(cells[12]),
        tier,
    };
    Ok((line, record))
}

fn single_char(s: &str) -> Option<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: duplicate character {character}")]
    DuplicateCharacter { line: usize, character: char },
    #[error("line {line}: character {character}: invalid {field}: {reason}")]
    InvariantViolation {
        line: usize,
        character: char,
        field: String,
        reason: String,
    },
    #[error("unknown feature identifier {0:?}")]
    UnknownFeature(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn fixture_path() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus_small.tsv")
    }

    fn write_corpus(rows: &[&str]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", CORPUS_COLUMNS.join("\t")).unwrap();
        for row in rows {
            writeln!(file, "{row}").unwrap();
        }
        file.flush().unwrap();
        file
    }

    const HAI_ROW: &str =
        "海\thǎi\tㄏㄞˇ\t氵\t10\t7\t4413155414\t左右\tU+6D77\titxu\tEOWY\t\t38157\tprimary";

    #[test]
    fn loads_fixture_and_looks_up_radical() {
        let corpus = Corpus::load(fixture_path()).unwrap();
        let hai = corpus.lookup('海').unwrap();
        assert_eq!(hai.radical, Some('氵'));
        assert_eq!(hai.unicode_point, "U+6D77");
        assert_eq!(hai.phonetic.as_deref(), Some("hǎi"));
        assert_eq!(hai.strokes, Some(10));
        assert!(corpus.len() >= 20);
    }

    #[test]
    fn fixture_counts_match_tiers() {
        let corpus = Corpus::load(fixture_path()).unwrap();
        let counts = corpus.counts();
        assert_eq!(counts.total, corpus.len());
        assert_eq!(counts.primary + counts.secondary, counts.total);
        assert_eq!(counts.secondary, 2);
    }

    #[test]
    fn lookup_is_total_for_non_chinese() {
        let corpus = Corpus::load(fixture_path()).unwrap();
        assert!(corpus.lookup('A').is_none());
        assert!(corpus.lookup('☃').is_none());
    }

    #[test]
    fn round_trip_every_record() {
        let corpus = Corpus::load(fixture_path()).unwrap();
        for record in corpus.records() {
            assert_eq!(corpus.lookup(record.character), Some(record));
        }
    }

    #[test]
    fn header_only_file_is_an_empty_corpus() {
        let file = write_corpus(&[]);
        let corpus = Corpus::load(file.path()).unwrap();
        assert!(corpus.is_empty());
        assert_eq!(corpus.counts().total, 0);
    }

    #[test]
    fn stroke_order_length_mismatch_is_rejected() {
        let row = "海\thǎi\t\t氵\t9\t7\t4413155414\t左右\tU+6D77\t\t\t\t\tprimary";
        let file = write_corpus(&[row]);
        let err = Corpus::load(file.path()).unwrap_err();
        match err {
            CorpusError::InvariantViolation {
                character, field, ..
            } => {
                assert_eq!(character, '海');
                assert_eq!(field, "stroke_order");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_character_is_rejected() {
        let file = write_corpus(&[HAI_ROW, HAI_ROW]);
        let err = Corpus::load(file.path()).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::DuplicateCharacter { character: '海', .. }
        ));
    }

    #[test]
    fn wrong_unicode_point_is_rejected() {
        let row = "海\thǎi\t\t氵\t10\t7\t\t左右\tU+6D78\t\t\t\t\tprimary";
        let file = write_corpus(&[row]);
        let err = Corpus::load(file.path()).unwrap_err();
        match err {
            CorpusError::InvariantViolation { character, field, .. } => {
                assert_eq!(character, '海');
                assert_eq!(field, "unicode_point");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "char\tpinyin").unwrap();
        writeln!(file, "{HAI_ROW}").unwrap();
        let err = Corpus::load(file.path()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedRow { line: 1, .. }));
    }

    #[test]
    fn validate_collects_all_violations() {
        let rows = [
            HAI_ROW,
            // stroke order / strokes mismatch
            "河\thé\t\t氵\t8\t5\t123\t左右\tU+6CB3\t\t\t\t\tprimary",
            HAI_ROW, // duplicate
            // outside > total
            "湖\thú\t\t氵\t12\t13\t\t左右\tU+6E56\t\t\t\t\tprimary",
            // bad tier
            "朱\tzhū\t\t木\t6\t2\t\t独体\tU+6731\t\t\t\t\ttertiary",
        ];
        let file = write_corpus(&rows);
        let report = validate_corpus_file(file.path()).unwrap();
        assert_eq!(report.rows, 5);
        assert_eq!(report.valid, 1);
        assert_eq!(report.violations.len(), 4);
    }

    #[test]
    fn taxonomy_is_a_partition() {
        for attr in Attribute::ALL {
            let holders: Vec<FeatureCategory> = FeatureCategory::ALL
                .into_iter()
                .filter(|c| c.members().contains(&attr))
                .collect();
            assert_eq!(holders.len(), 1, "{attr} must be in exactly one category");
            assert_eq!(holders[0], attr.category());
        }
        let member_total: usize = FeatureCategory::ALL.iter().map(|c| c.members().len()).sum();
        assert_eq!(member_total, Attribute::ALL.len());
    }

    #[test]
    fn annotate_known_pair() {
        let corpus = Corpus::load(fixture_path()).unwrap();
        let features = FeatureSet::new([Attribute::Phonetic, Attribute::Radical]);
        let anns = corpus.annotate_sentence("海河", &features);
        assert_eq!(anns.len(), 2);
        assert_eq!(
            anns[0].values,
            vec![
                (Attribute::Phonetic, Some("hǎi".to_string())),
                (Attribute::Radical, Some("氵".to_string())),
            ]
        );
        assert_eq!(
            anns[1].values,
            vec![
                (Attribute::Phonetic, Some("hé".to_string())),
                (Attribute::Radical, Some("氵".to_string())),
            ]
        );
    }

    #[test]
    fn annotate_empty_sentence() {
        let corpus = Corpus::load(fixture_path()).unwrap();
        let features = FeatureSet::new([Attribute::Radical]);
        assert!(corpus.annotate_sentence("", &features).is_empty());
    }

    #[test]
    fn annotate_unknown_character_gets_placeholder() {
        let corpus = Corpus::load(fixture_path()).unwrap();
        let features = FeatureSet::new([Attribute::Radical]);
        let anns = corpus.annotate_sentence("海A", &features);
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].values[0].1.as_deref(), Some("氵"));
        assert_eq!(anns[1].values[0].1, None);
    }

    #[test]
    fn feature_set_parsing() {
        let fs = FeatureSet::parse("phonetic, radical").unwrap();
        assert_eq!(fs.len(), 2);
        assert!(fs.contains(Attribute::Phonetic));
        assert_eq!(fs.to_string(), "phonetic+radical");
        // the rendered form parses back to the same set
        assert_eq!(FeatureSet::parse(&fs.to_string()).unwrap(), fs);
        assert!(FeatureSet::parse("none").unwrap().is_empty());
        assert!(FeatureSet::parse("").unwrap().is_empty());
        assert!(matches!(
            FeatureSet::parse("pinyin_typo"),
            Err(CorpusError::UnknownFeature(_))
        ));
    }

    // Full GB2312 table, if present locally; the bundled fixture keeps the
    // rest of the suite independent of it.
    #[test]
    fn full_gb2312_counts_when_available() {
        let Ok(path) = std::env::var("CSC_EVAL_GB2312_CORPUS") else {
            return;
        };
        let corpus = Corpus::load(path).unwrap();
        let counts = corpus.counts();
        assert_eq!(counts.total, 6763);
        assert_eq!(counts.primary, 3755);
        assert_eq!(counts.secondary, 3008);
    }

    proptest! {
        #[test]
        fn annotation_length_matches_scalar_count(sentence in ".*", pick in 0usize..8) {
            let corpus = Corpus::load(fixture_path()).unwrap();
            let features = match pick % 4 {
                0 => FeatureSet::empty(),
                1 => FeatureSet::new([Attribute::Phonetic]),
                2 => FeatureSet::new([Attribute::Radical, Attribute::Strokes]),
                _ => FeatureSet::new(Attribute::ALL),
            };
            let anns = corpus.annotate_sentence(&sentence, &features);
            prop_assert_eq!(anns.len(), sentence.chars().count());
            for ann in &anns {
                prop_assert_eq!(ann.values.len(), features.len());
            }
        }
    }
}
