//! Deterministic chat-transcript assembly: a fixed system preamble, optional
//! in-context exemplar turns, and a query turn carrying per-character
//! semantic annotations and the declared sentence length.
//!
//! All wording lives in template files so phrasing can change without code
//! changes; builders only substitute values into named placeholders.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Attribute, Corpus, FeatureSet};
use crate::dataset::SentencePair;

/// In-context learning regime; fixes how many exemplar pairs the transcript
/// carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ZeroShot,
    OneShot,
    FewShot,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::ZeroShot, Regime::OneShot, Regime::FewShot];

    pub fn name(self) -> &'static str {
        match self {
            Regime::ZeroShot => "zero_shot",
            Regime::OneShot => "one_shot",
            Regime::FewShot => "few_shot",
        }
    }

    pub fn parse(s: &str) -> Result<Regime, PromptError> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| PromptError::UnknownRegime(s.to_string()))
    }

    pub fn exemplar_count(self) -> usize {
        match self {
            Regime::ZeroShot => 0,
            Regime::OneShot => 1,
            Regime::FewShot => 3,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The attributes a prompt may annotate with.
pub const PROMPT_FEATURES: [Attribute; 4] = [
    Attribute::Phonetic,
    Attribute::Radical,
    Attribute::Strokes,
    Attribute::Structure,
];

#[derive(Debug, Clone)]
pub struct PromptConfig {
    pub regime: Regime,
    pub features: FeatureSet,
    /// Exemplar pairs, length matching the regime (0, 1, or 3).
    pub exemplars: Vec<SentencePair>,
    pub template_id: String,
}

impl PromptConfig {
    pub fn validate(&self) -> Result<(), PromptError> {
        let expected = self.regime.exemplar_count();
        if self.exemplars.len() != expected {
            return Err(PromptError::ExemplarCountMismatch {
                regime: self.regime,
                expected,
                found: self.exemplars.len(),
            });
        }
        for attr in self.features.iter() {
            if !PROMPT_FEATURES.contains(&attr) {
                return Err(PromptError::UnsupportedFeature(attr));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
}

/// A complete per-sentence conversation: no state is shared between
/// sentences, so every query starts from a fresh history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub turns: Vec<ChatTurn>,
    pub query_sentence: String,
}

impl Transcript {
    /// Plain-text rendering for logs and inspection; the golden-file tests
    /// pin this format.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (i, turn) in self.turns.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            out.push('[');
            out.push_str(turn.role.name());
            out.push_str("]\n");
            out.push_str(&turn.content);
        }
        out.push('\n');
        out
    }
}

/// Wording of one prompt rendering, loaded from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub id: String,
    preamble: String,
    query: String,
    annotations_header: String,
    annotation_line: String,
    annotation_value: String,
    value_separator: String,
    unknown: String,
    feature_labels: BTreeMap<String, String>,
}

impl Template {
    pub fn parse(text: &str, origin: &str) -> Result<Template, PromptError> {
        let template: Template =
            toml::from_str(text).map_err(|e| PromptError::TemplateParse {
                origin: origin.to_string(),
                reason: e.to_string(),
            })?;
        template.check(origin)?;
        Ok(template)
    }

    fn check(&self, origin: &str) -> Result<(), PromptError> {
        let fail = |reason: String| PromptError::TemplateParse {
            origin: origin.to_string(),
            reason,
        };
        if self.id.is_empty() {
            return Err(fail("id must be non-empty".into()));
        }
        if self.preamble.is_empty() {
            return Err(fail("preamble must be non-empty".into()));
        }
        for placeholder in ["{sentence}", "{annotations}", "{length}"] {
            if !self.query.contains(placeholder) {
                return Err(fail(format!("query must contain {placeholder}")));
            }
        }
        for attr in PROMPT_FEATURES {
            if !self.feature_labels.contains_key(attr.name()) {
                return Err(fail(format!("feature_labels must define {}", attr.name())));
            }
        }
        Ok(())
    }

    fn label(&self, attr: Attribute) -> &str {
        // presence checked at parse time for all prompt features
        self.feature_labels
            .get(attr.name())
            .map(String::as_str)
            .unwrap_or(attr.name())
    }
}

/// Named templates, keyed by id. Bundled renderings are always present;
/// directory loads can add more or replace them.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    templates: BTreeMap<String, Template>,
}

pub const DEFAULT_TEMPLATE_ID: &str = "zh";

impl TemplateStore {
    /// The two bundled renderings: "zh" (default) and "en".
    pub fn builtin() -> TemplateStore {
        let mut store = TemplateStore {
            templates: BTreeMap::new(),
        };
        for (name, text) in [
            ("zh", include_str!("../templates/zh.toml")),
            ("en", include_str!("../templates/en.toml")),
        ] {
            let template = Template::parse(text, name).expect("bundled template must parse");
            store.insert(template);
        }
        store
    }

    /// Adds every `*.toml` file in `dir` on top of the bundled templates.
    pub fn builtin_with_dir<P: AsRef<Path>>(dir: P) -> Result<TemplateStore, PromptError> {
        let mut store = TemplateStore::builtin();
        store.load_dir(dir)?;
        Ok(store)
    }

    pub fn load_dir<P: AsRef<Path>>(&mut self, dir: P) -> Result<(), PromptError> {
        let dir = dir.as_ref();
        let entries = fs::read_dir(dir).map_err(|e| PromptError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| PromptError::Io {
                path: path.clone(),
                source: e,
            })?;
            let template = Template::parse(&text, &path.display().to_string())?;
            self.insert(template);
        }
        Ok(())
    }

    pub fn insert(&mut self, template: Template) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Result<&Template, PromptError> {
        self.templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> Vec<&str> {
        self.templates.keys().map(String::as_str).collect()
    }
}

/// Builds transcripts from a corpus and a template store.
#[derive(Debug, Clone, Copy)]
pub struct PromptBuilder<'a> {
    corpus: &'a Corpus,
    templates: &'a TemplateStore,
}

impl<'a> PromptBuilder<'a> {
    pub fn new(corpus: &'a Corpus, templates: &'a TemplateStore) -> PromptBuilder<'a> {
        PromptBuilder { corpus, templates }
    }

    /// The fixed system turn: identity, task restrictions, and the
    /// equal-length output requirement, verbatim from the template.
    pub fn build_preamble(&self, config: &PromptConfig) -> Result<ChatTurn, PromptError> {
        let template = self.templates.get(&config.template_id)?;
        Ok(ChatTurn {
            role: Role::System,
            content: template.preamble.clone(),
        })
    }

    /// The user turn for one sentence: instruction, the sentence, one
    /// annotation line per character (when features are requested), and the
    /// declared character count.
    pub fn build_query(&self, sentence: &str, config: &PromptConfig) -> Result<ChatTurn, PromptError> {
        let template = self.templates.get(&config.template_id)?;
        if sentence.is_empty() {
            return Err(PromptError::EmptySentence);
        }
        let annotations = self.render_annotations(template, sentence, &config.features);
        let length = sentence.chars().count().to_string();
        let content = render(
            &template.query,
            &[
                ("sentence", sentence),
                ("annotations", &annotations),
                ("length", &length),
            ],
        );
        Ok(ChatTurn {
            role: Role::User,
            content,
        })
    }

    /// The full conversation: preamble, one (user, assistant) turn pair per
    /// exemplar, then the query turn. Turn count is 2 + 2·|exemplars|.
    pub fn build_transcript(
        &self,
        sentence: &str,
        config: &PromptConfig,
    ) -> Result<Transcript, PromptError> {
        config.validate()?;
        let mut turns = Vec::with_capacity(2 + 2 * config.exemplars.len());
        turns.push(self.build_preamble(config)?);
        for exemplar in &config.exemplars {
            turns.push(self.build_query(&exemplar.source, config)?);
            turns.push(ChatTurn {
                role: Role::Assistant,
                content: exemplar.gold.clone(),
            });
        }
        turns.push(self.build_query(sentence, config)?);
        Ok(Transcript {
            turns,
            query_sentence: sentence.to_string(),
        })
    }

    /// One line per character; empty string when no features are requested.
    /// A non-empty block ends with a newline so the template can place the
    /// next element on its own line.
    fn render_annotations(&self, template: &Template, sentence: &str, features: &FeatureSet) -> String {
        if features.is_empty() {
            return String::new();
        }
        let mut block = String::new();
        block.push_str(&template.annotations_header);
        block.push('\n');
        for annotation in self.corpus.annotate_sentence(sentence, features) {
            let values: Vec<String> = annotation
                .values
                .iter()
                .map(|(attr, value)| {
                    render(
                        &template.annotation_value,
                        &[
                            ("label", template.label(*attr)),
                            ("value", value.as_deref().unwrap_or(&template.unknown)),
                        ],
                    )
                })
                .collect();
            let line = render(
                &template.annotation_line,
                &[
                    ("char", &annotation.character.to_string()),
                    ("values", &values.join(&template.value_separator)),
                ],
            );
            block.push_str(&line);
            block.push('\n');
        }
        block
    }
}

/// Substitutes `{name}` placeholders in a single pass over the template.
/// Substituted values are never rescanned, so placeholder-like text inside a
/// sentence stays literal. Unmatched braces and unknown names pass through.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        if let Some(end) = after.find('}') {
            let name = &after[..end];
            if let Some((_, value)) = vars.iter().find(|(k, _)| *k == name) {
                out.push_str(value);
                rest = &after[end + 1..];
                continue;
            }
        }
        out.push('{');
        rest = after;
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("unknown regime {0:?} (expected zero_shot, one_shot, or few_shot)")]
    UnknownRegime(String),
    #[error("query sentence must be non-empty")]
    EmptySentence,
    #[error("{regime} requires {expected} exemplars, found {found}")]
    ExemplarCountMismatch {
        regime: Regime,
        expected: usize,
        found: usize,
    },
    #[error("feature {0} cannot be used in prompts (allowed: phonetic, radical, strokes, structure)")]
    UnsupportedFeature(Attribute),
    #[error("template {origin}: {reason}")]
    TemplateParse { origin: String, reason: String },
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
    use crate::corpus::Attribute;
    use proptest::prelude::*;

    fn corpus() -> Corpus {
        Corpus::load(
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus_small.tsv"),
        )
        .unwrap()
    }

    fn pair(id: &str, source: &str, gold: &str) -> SentencePair {
        SentencePair {
            id: id.to_string(),
            source: source.to_string(),
            gold: gold.to_string(),
        }
    }

    fn exemplars() -> Vec<SentencePair> {
        vec![
            pair("00001", "我真胡秃", "我真糊涂"),
            pair("00003", "我们去看大河", "我们去看大湖"),
            pair("00004", "你们好", "你们好"),
        ]
    }

    fn config(regime: Regime, features: &[Attribute]) -> PromptConfig {
        let exemplars = match regime {
            Regime::ZeroShot => vec![],
            Regime::OneShot => exemplars()[..1].to_vec(),
            Regime::FewShot => exemplars(),
        };
        PromptConfig {
            regime,
            features: FeatureSet::new(features.iter().copied()),
            exemplars,
            template_id: DEFAULT_TEMPLATE_ID.to_string(),
        }
    }

    #[test]
    fn turn_count_follows_regime() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        for regime in Regime::ALL {
            let cfg = config(regime, &[Attribute::Phonetic]);
            let transcript = builder.build_transcript("我真胡秃", &cfg).unwrap();
            assert_eq!(transcript.turns.len(), 2 + 2 * regime.exemplar_count());
            assert_eq!(transcript.turns[0].role, Role::System);
            assert_eq!(transcript.turns.last().unwrap().role, Role::User);
            assert_eq!(transcript.query_sentence, "我真胡秃");
        }
    }

    #[test]
    fn exemplar_assistant_turns_hold_exactly_the_gold() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::FewShot, &[Attribute::Phonetic, Attribute::Radical]);
        let transcript = builder.build_transcript("河水真好", &cfg).unwrap();
        assert_eq!(transcript.turns[2].role, Role::Assistant);
        assert_eq!(transcript.turns[2].content, "我真糊涂");
        assert_eq!(transcript.turns[4].content, "我们去看大湖");
        assert_eq!(transcript.turns[6].content, "你们好");
    }

    #[test]
    fn query_annotates_every_character_in_order() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[Attribute::Phonetic, Attribute::Radical]);
        let turn = builder.build_query("我真胡秃", &cfg).unwrap();
        let annotation_lines: Vec<&str> = turn
            .content
            .lines()
            .filter(|l| l.contains("拼音"))
            .collect();
        assert_eq!(annotation_lines.len(), 4);
        for (line, ch) in annotation_lines.iter().zip("我真胡秃".chars()) {
            assert!(line.starts_with(ch), "line {line:?} must start with {ch}");
        }
        assert!(turn.content.contains("句子的长度为：4"));
    }

    #[test]
    fn empty_feature_set_omits_annotation_block() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[]);
        let turn = builder.build_query("你好", &cfg).unwrap();
        assert!(!turn.content.contains("语义信息"));
        assert!(turn.content.contains("句子的长度为：2"));
    }

    #[test]
    fn unknown_character_renders_placeholder() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[Attribute::Radical]);
        let turn = builder.build_query("海Q", &cfg).unwrap();
        assert!(turn.content.contains("未知"));
    }

    #[test]
    fn length_counts_characters_not_bytes() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[]);
        let turn = builder.build_query("海", &cfg).unwrap();
        assert!(turn.content.contains("句子的长度为：1"));
    }

    #[test]
    fn preamble_is_deterministic_and_restates_constraints() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[]);
        let a = builder.build_preamble(&cfg).unwrap();
        let b = builder.build_preamble(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.role, Role::System);
        assert!(a.content.contains("中文拼写纠错"));
        assert!(a.content.contains("长度"));
    }

    #[test]
    fn english_template_keeps_identity_phrase() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let mut cfg = config(Regime::ZeroShot, &[]);
        cfg.template_id = "en".to_string();
        let turn = builder.build_preamble(&cfg).unwrap();
        assert!(turn
            .content
            .contains("you are an excellent Chinese Spell Checking model"));
    }

    #[test]
    fn unknown_template_is_an_error() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let mut cfg = config(Regime::ZeroShot, &[]);
        cfg.template_id = "missing".to_string();
        assert!(matches!(
            builder.build_preamble(&cfg),
            Err(PromptError::UnknownTemplate(id)) if id == "missing"
        ));
    }

    #[test]
    fn empty_sentence_is_an_error() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[]);
        assert!(matches!(
            builder.build_query("", &cfg),
            Err(PromptError::EmptySentence)
        ));
    }

    #[test]
    fn exemplar_count_must_match_regime() {
        let mut cfg = config(Regime::FewShot, &[]);
        cfg.exemplars.pop();
        match cfg.validate().unwrap_err() {
            PromptError::ExemplarCountMismatch {
                regime,
                expected,
                found,
            } => {
                assert_eq!((regime, expected, found), (Regime::FewShot, 3, 2));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn non_prompt_attributes_are_rejected() {
        let mut cfg = config(Regime::ZeroShot, &[]);
        cfg.features = FeatureSet::new([Attribute::WubiCode]);
        assert!(matches!(
            cfg.validate(),
            Err(PromptError::UnsupportedFeature(Attribute::WubiCode))
        ));
    }

    #[test]
    fn placeholder_text_in_sentences_stays_literal() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[]);
        let turn = builder.build_query("好{length}好", &cfg).unwrap();
        // the sentence's own "{length}" must survive; the template's
        // placeholder still resolves (10 characters)
        assert!(turn.content.contains("好{length}好"));
        assert!(turn.content.contains("句子的长度为：10"));
    }

    #[test]
    fn render_passes_through_unmatched_braces() {
        assert_eq!(render("a{x}b", &[("x", "1")]), "a1b");
        assert_eq!(render("a{y}b", &[("x", "1")]), "a{y}b");
        assert_eq!(render("a{b", &[]), "a{b");
        assert_eq!(render("{x}{x}", &[("x", "{x}")]), "{x}{x}");
        assert_eq!(render("", &[("x", "1")]), "");
    }

    #[test]
    fn feature_subsets_differ_only_in_annotations() {
        let corpus = corpus();
        let store = TemplateStore::builtin();
        let builder = PromptBuilder::new(&corpus, &store);
        let small = config(Regime::FewShot, &[Attribute::Phonetic]);
        let large = config(
            Regime::FewShot,
            &[Attribute::Phonetic, Attribute::Radical, Attribute::Strokes],
        );
        let text_small = builder.build_transcript("河水真好", &small).unwrap().render_text();
        let text_large = builder.build_transcript("河水真好", &large).unwrap().render_text();
        let residue = |text: &str| -> Vec<String> {
            text.lines()
                .filter(|l| !l.contains("拼音"))
                .map(String::from)
                .collect()
        };
        assert_eq!(residue(&text_small), residue(&text_large));
    }

    #[test]
    fn template_validation_rejects_missing_placeholders() {
        let bad = r#"
id = "bad"
preamble = "p"
query = "no placeholders here"
annotations_header = "h"
annotation_line = "{char}: {values}"
annotation_value = "{label}={value}"
value_separator = ", "
unknown = "?"
[feature_labels]
phonetic = "a"
radical = "b"
strokes = "c"
structure = "d"
"#;
        assert!(matches!(
            Template::parse(bad, "inline"),
            Err(PromptError::TemplateParse { .. })
        ));
    }

    #[test]
    fn template_store_directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let custom = r#"
id = "zh"
preamble = "自定义前言：只纠正拼写错误，保持长度不变。"
query = "句子：{sentence}\n{annotations}长度：{length}"
annotations_header = "注释："
annotation_line = "{char}（{values}）"
annotation_value = "{label}：{value}"
value_separator = "，"
unknown = "未知"
[feature_labels]
phonetic = "拼音"
radical = "部首"
strokes = "笔画"
structure = "结构"
"#;
        std::fs::write(dir.path().join("zh.toml"), custom).unwrap();
        let store = TemplateStore::builtin_with_dir(dir.path()).unwrap();
        let corpus = corpus();
        let builder = PromptBuilder::new(&corpus, &store);
        let cfg = config(Regime::ZeroShot, &[]);
        let turn = builder.build_preamble(&cfg).unwrap();
        assert!(turn.content.starts_with("自定义前言"));
        // the bundled alternate rendering is still present
        assert!(store.get("en").is_ok());
    }

    proptest! {
        #[test]
        fn declared_length_matches_character_count(
            chars in proptest::collection::vec(
                prop_oneof![Just('我'), Just('海'), Just('河'), Just('好'), Just('A'), Just('ß')],
                1..30,
            ),
        ) {
            let corpus = corpus();
            let store = TemplateStore::builtin();
            let builder = PromptBuilder::new(&corpus, &store);
            let sentence: String = chars.iter().collect();
            let cfg = config(Regime::ZeroShot, &[Attribute::Phonetic]);
            let turn = builder.build_query(&sentence, &cfg).unwrap();
            let needle = format!("句子的长度为：{}", sentence.chars().count());
            prop_assert!(turn.content.contains(&needle));
        }

        #[test]
        fn transcripts_are_deterministic(pick in 0usize..3) {
            let corpus = corpus();
            let store = TemplateStore::builtin();
            let builder = PromptBuilder::new(&corpus, &store);
            let regime = Regime::ALL[pick];
            let cfg = config(regime, &[Attribute::Phonetic, Attribute::Radical]);
            let a = builder.build_transcript("希望你们好好的跳无", &cfg).unwrap();
            let b = builder.build_transcript("希望你们好好的跳无", &cfg).unwrap();
            prop_assert_eq!(a.render_text(), b.render_text());
        }
    }
}
