//! End-to-end orchestration: loads a declarative run config, expands the
//! (dataset × regime × feature-set) grid, fans sentences out to a bounded
//! worker pool, records every exchange to a replay log, and writes the
//! aggregated report.
//!
//! Failed sentences never abort a run: they are logged with their error and
//! scored as empty outputs, and the cell carries a failure count.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;
use thiserror::Error;

use crate::backend::{
    BackendConfig, BackendError, BackendKind, ChatBackend, CompletionRequest, EchoBackend,
    GoldBackend, HttpBackend, ScriptedBackend, strip_response,
};
use crate::corpus::{Corpus, CorpusError, FeatureSet};
use crate::dataset::{select_exemplars, Dataset, DatasetError, SentencePair, Split};
use crate::eval::{aggregate, judge_sentence, MetricsReport, Prediction};
use crate::prompt::{
    PromptBuilder, PromptConfig, PromptError, Regime, TemplateStore, PROMPT_FEATURES,
};
use crate::replay::{self, ReplayError, ReplayRecord, ReplayWriter};
use crate::report::{CellReport, RunMeta, RunReport};

fn default_workers() -> usize {
    4
}

fn default_true() -> bool {
    true
}

fn default_template() -> String {
    crate::prompt::DEFAULT_TEMPLATE_ID.to_string()
}

fn default_regime() -> String {
    Regime::FewShot.name().to_string()
}

fn default_features() -> Vec<String> {
    vec!["phonetic".to_string(), "radical".to_string()]
}

/// Declarative description of a run. Relative paths are resolved against
/// the config file's directory at load time.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Reserved for sampled choices; the current pipeline is deterministic,
    /// so this is only echoed into the report.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub strip_responses: bool,
    #[serde(default = "default_template")]
    pub template: String,
    /// Extra template files loaded on top of the bundled ones.
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    pub datasets: Vec<DatasetEntry>,
    pub backend: BackendConfig,
    #[serde(default)]
    pub prompt: PromptSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub test: PathBuf,
    /// Training split for exemplar selection; required by one_shot/few_shot
    /// cells unless [[prompt.exemplars]] overrides are given.
    #[serde(default)]
    pub train: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    #[serde(default = "default_regime")]
    pub regime: String,
    #[serde(default = "default_features")]
    pub features: Vec<String>,
    /// Manual exemplar override: exactly three pairs, replacing automatic
    /// selection from the train split.
    #[serde(default)]
    pub exemplars: Option<Vec<ExemplarEntry>>,
}

impl Default for PromptSection {
    fn default() -> PromptSection {
        PromptSection {
            regime: default_regime(),
            features: default_features(),
            exemplars: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExemplarEntry {
    pub source: String,
    pub gold: String,
}

/// Ablation grid: every listed regime is crossed with every listed feature
/// set. Unset lists fall back to the single [prompt] value.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub regimes: Option<Vec<String>>,
    #[serde(default)]
    pub feature_sets: Option<Vec<Vec<String>>>,
}

impl RunConfig {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<RunConfig, RunnerError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| RunnerError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| {
            RunnerError::InvalidConfig(format!("{}: {e}", path.display()))
        })?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    /// Rewrites relative paths to be relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.corpus);
        resolve(&mut self.output_dir);
        if let Some(dir) = &mut self.template_dir {
            resolve(dir);
        }
        for entry in &mut self.datasets {
            resolve(&mut entry.test);
            if let Some(train) = &mut entry.train {
                resolve(train);
            }
        }
        if let Some(script) = &mut self.backend.script_path {
            resolve(script);
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let invalid = |reason: String| Err(RunnerError::InvalidConfig(reason));
        if self.workers == 0 {
            return invalid("workers must be at least 1".into());
        }
        if self.datasets.is_empty() {
            return invalid("at least one [[datasets]] entry is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for entry in &self.datasets {
            if entry.name.is_empty() {
                return invalid("dataset name must be non-empty".into());
            }
            if !names.insert(&entry.name) {
                return invalid(format!("duplicate dataset name {:?}", entry.name));
            }
            if !entry.test.exists() {
                return invalid(format!(
                    "dataset {:?}: test file {} does not exist",
                    entry.name,
                    entry.test.display()
                ));
            }
            if let Some(train) = &entry.train {
                if !train.exists() {
                    return invalid(format!(
                        "dataset {:?}: train file {} does not exist",
                        entry.name,
                        train.display()
                    ));
                }
            }
        }
        if !self.corpus.exists() {
            return invalid(format!("corpus file {} does not exist", self.corpus.display()));
        }
        self.backend.validate()?;
        if self.backend.kind == BackendKind::MockScripted && self.datasets.len() != 1 {
            return invalid(
                "mock_scripted serves responses by sentence id; use exactly one dataset".into(),
            );
        }
        let regimes = self.regimes()?;
        let feature_sets = self.feature_sets()?;
        let mut seen_regimes = std::collections::BTreeSet::new();
        for regime in &regimes {
            if !seen_regimes.insert(regime.name()) {
                return invalid(format!("regime {regime} listed twice in the sweep"));
            }
        }
        let mut seen_features = std::collections::BTreeSet::new();
        for fs in &feature_sets {
            for attr in fs.iter() {
                if !PROMPT_FEATURES.contains(&attr) {
                    return invalid(format!("feature {attr} cannot be used in prompts"));
                }
            }
            if !seen_features.insert(fs.to_string()) {
                return invalid(format!("feature set {fs} listed twice in the sweep"));
            }
        }
        if let Some(manual) = &self.prompt.exemplars {
            if manual.len() != 3 {
                return invalid(format!(
                    "prompt.exemplars must have exactly 3 entries, found {}",
                    manual.len()
                ));
            }
            for (i, e) in manual.iter().enumerate() {
                if e.source.chars().count() != e.gold.chars().count() {
                    return invalid(format!(
                        "prompt.exemplars[{i}]: source and gold lengths differ"
                    ));
                }
                if e.source.is_empty() {
                    return invalid(format!("prompt.exemplars[{i}]: sentences are empty"));
                }
            }
        }
        Ok(())
    }

    /// The regimes the grid will cover.
    pub fn regimes(&self) -> Result<Vec<Regime>, RunnerError> {
        let names: Vec<String> = match self.sweep.as_ref().and_then(|s| s.regimes.clone()) {
            Some(list) if !list.is_empty() => list,
            _ => vec![self.prompt.regime.clone()],
        };
        names
            .iter()
            .map(|n| Regime::parse(n).map_err(RunnerError::from))
            .collect()
    }

    /// The feature sets the grid will cover.
    pub fn feature_sets(&self) -> Result<Vec<FeatureSet>, RunnerError> {
        let lists: Vec<Vec<String>> = match self.sweep.as_ref().and_then(|s| s.feature_sets.clone()) {
            Some(list) if !list.is_empty() => list,
            _ => vec![self.prompt.features.clone()],
        };
        lists
            .iter()
            .map(|names| FeatureSet::from_names(names).map_err(RunnerError::from))
            .collect()
    }

    pub fn select_dataset(&mut self, name: &str) -> Result<(), RunnerError> {
        if !self.datasets.iter().any(|d| d.name == name) {
            return Err(RunnerError::InvalidConfig(format!(
                "no dataset named {name:?} among the {} configured",
                self.datasets.len()
            )));
        }
        self.datasets.retain(|d| d.name == name);
        Ok(())
    }

    pub fn override_regime(&mut self, regime: &str) {
        self.prompt.regime = regime.to_string();
        if let Some(sweep) = &mut self.sweep {
            sweep.regimes = None;
        }
    }

    /// `features` is comma-separated; "none" selects the empty set.
    pub fn override_features(&mut self, features: &str) {
        self.prompt.features = if features.trim() == "none" || features.trim().is_empty() {
            vec![]
        } else {
            features.split(',').map(|s| s.trim().to_string()).collect()
        };
        if let Some(sweep) = &mut self.sweep {
            sweep.feature_sets = None;
        }
    }

    pub fn override_backend_kind(&mut self, kind: &str) -> Result<(), RunnerError> {
        self.backend.kind = BackendKind::parse(kind)?;
        Ok(())
    }
}

/// Instantiates the configured backend. The gold mock answers from the
/// dataset under evaluation; the scripted mock replays a recorded log.
pub fn build_backend(
    config: &BackendConfig,
    dataset: &Dataset,
) -> Result<Box<dyn ChatBackend>, RunnerError> {
    config.validate()?;
    Ok(match config.kind {
        BackendKind::MockEcho => Box::new(EchoBackend),
        BackendKind::MockGold => Box::new(GoldBackend::from_dataset(dataset)),
        BackendKind::MockScripted => {
            let path = config.script_path.as_ref().expect("checked by validate");
            let records = replay::load_log(path)?;
            Box::new(ScriptedBackend::keyed(
                records.into_iter().map(|r| (r.id, r.raw_response)),
            ))
        }
        BackendKind::HttpOpenAiCompatible => Box::new(HttpBackend::from_config(config)?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub metrics: MetricsReport,
    pub failure_count: usize,
}

/// Runs the full grid and writes `report.json`, `report.csv`, and one replay
/// log per cell into the output directory.
pub fn run_eval(config: &RunConfig) -> Result<RunReport, RunnerError> {
    config.validate()?;
    let corpus = Corpus::load(&config.corpus)?;
    let templates = match &config.template_dir {
        Some(dir) => TemplateStore::builtin_with_dir(dir)?,
        None => TemplateStore::builtin(),
    };
    templates.get(&config.template)?;
    let regimes = config.regimes()?;
    let feature_sets = config.feature_sets()?;
    fs::create_dir_all(&config.output_dir).map_err(|e| RunnerError::Io {
        path: config.output_dir.clone(),
        source: e,
    })?;

    let mut cells = Vec::new();
    for entry in &config.datasets {
        let test = Dataset::load(&entry.test, &entry.name, Split::Test)?;
        let exemplars = if regimes.iter().any(|r| r.exemplar_count() > 0) {
            Some(resolve_exemplars(config, entry, &corpus)?)
        } else {
            None
        };
        let backend = build_backend(&config.backend, &test)?;
        for &regime in &regimes {
            for features in &feature_sets {
                let prompt_config = PromptConfig {
                    regime,
                    features: features.clone(),
                    exemplars: match regime {
                        Regime::ZeroShot => vec![],
                        Regime::OneShot => exemplars.as_ref().expect("resolved above")[..1].to_vec(),
                        Regime::FewShot => exemplars.as_ref().expect("resolved above").clone(),
                    },
                    template_id: config.template.clone(),
                };
                prompt_config.validate()?;
                let log_name = format!("replay-{}-{}-{}.jsonl", entry.name, regime.name(), features);
                let outcome = run_cell(
                    &corpus,
                    &templates,
                    &test,
                    &prompt_config,
                    backend.as_ref(),
                    &config.output_dir.join(&log_name),
                    config.workers,
                    config.strip_responses,
                )?;
                cells.push(CellReport::new(
                    &entry.name,
                    regime,
                    &features.to_string(),
                    outcome.metrics,
                    outcome.failure_count,
                    &log_name,
                ));
            }
        }
    }

    let report = RunReport {
        meta: RunMeta {
            backend_kind: config.backend.kind.name().to_string(),
            model_name: config.backend.model_name.clone(),
            template: config.template.clone(),
            workers: config.workers,
            seed: config.seed,
            strip_responses: config.strip_responses,
        },
        cells,
    };
    report
        .write_to_dir(&config.output_dir)
        .map_err(|e| RunnerError::Io {
            path: config.output_dir.clone(),
            source: e,
        })?;
    Ok(report)
}

fn resolve_exemplars(
    config: &RunConfig,
    entry: &DatasetEntry,
    corpus: &Corpus,
) -> Result<Vec<SentencePair>, RunnerError> {
    if let Some(manual) = &config.prompt.exemplars {
        return Ok(manual
            .iter()
            .enumerate()
            .map(|(i, e)| SentencePair {
                id: format!("manual-{}", i + 1),
                source: e.source.clone(),
                gold: e.gold.clone(),
            })
            .collect());
    }
    let train_path = entry
        .train
        .as_ref()
        .ok_or_else(|| RunnerError::MissingTrainSplit(entry.name.clone()))?;
    let train = Dataset::load(train_path, &entry.name, Split::Train)?;
    Ok(select_exemplars(&train, corpus)?.into_vec())
}

/// Evaluates one grid cell: builds a fresh transcript per sentence, queries
/// the backend from up to `workers` threads, streams replay records, and
/// aggregates judgments in dataset order so worker scheduling cannot change
/// the report.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    corpus: &Corpus,
    templates: &TemplateStore,
    dataset: &Dataset,
    prompt_config: &PromptConfig,
    backend: &dyn ChatBackend,
    log_path: &Path,
    workers: usize,
    strip_responses: bool,
) -> Result<CellOutcome, RunnerError> {
    let writer = ReplayWriter::create(log_path)?;
    let builder = PromptBuilder::new(corpus, templates);
    let pairs = dataset.pairs();
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<(Prediction, bool)>>> =
        (0..pairs.len()).map(|_| Mutex::new(None)).collect();
    let fatal: Mutex<Option<RunnerError>> = Mutex::new(None);
    let worker_count = workers.min(pairs.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                if fatal.lock().expect("fatal mutex poisoned").is_some() {
                    return;
                }
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some(pair) = pairs.get(idx) else { return };
                match process_sentence(&builder, pair, prompt_config, backend, strip_responses) {
                    Ok((record, prediction, failed)) => {
                        if let Err(e) = writer.append(&record) {
                            *fatal.lock().expect("fatal mutex poisoned") = Some(e.into());
                            return;
                        }
                        *slots[idx].lock().expect("slot mutex poisoned") =
                            Some((prediction, failed));
                    }
                    Err(e) => {
                        *fatal.lock().expect("fatal mutex poisoned") = Some(e);
                        return;
                    }
                }
            });
        }
    });

    if let Some(error) = fatal.into_inner().expect("fatal mutex poisoned") {
        return Err(error);
    }
    let mut predictions = Vec::with_capacity(pairs.len());
    let mut failure_count = 0;
    for slot in slots {
        let (prediction, failed) = slot
            .into_inner()
            .expect("slot mutex poisoned")
            .expect("every sentence is processed unless a fatal error aborted");
        failure_count += usize::from(failed);
        predictions.push(prediction);
    }
    let judgments: Vec<_> = predictions.iter().map(judge_sentence).collect();
    Ok(CellOutcome {
        metrics: aggregate(&judgments),
        failure_count,
    })
}

/// Builds the transcript, queries the backend, and shapes the result. A
/// backend failure becomes an error record scored as an empty output; a
/// transcript build failure is fatal because it means the configuration,
/// not the sentence, is broken.
fn process_sentence(
    builder: &PromptBuilder<'_>,
    pair: &SentencePair,
    prompt_config: &PromptConfig,
    backend: &dyn ChatBackend,
    strip_responses: bool,
) -> Result<(ReplayRecord, Prediction, bool), RunnerError> {
    let transcript = builder.build_transcript(&pair.source, prompt_config)?;
    let request = CompletionRequest {
        sentence_id: &pair.id,
        transcript: &transcript,
    };
    let (raw, stripped, latency_ms, error) = match backend.complete(&request) {
        Ok(completion) => {
            let stripped = if strip_responses {
                strip_response(&completion.text)
            } else {
                completion.text.clone()
            };
            (
                completion.text,
                stripped,
                completion.latency.as_millis() as u64,
                None,
            )
        }
        Err(e) => (String::new(), String::new(), 0, Some(e.to_string())),
    };
    let failed = error.is_some();
    let prediction = Prediction {
        id: pair.id.clone(),
        source: pair.source.clone(),
        gold: pair.gold.clone(),
        output: stripped.clone(),
    };
    let record = ReplayRecord {
        id: pair.id.clone(),
        transcript,
        raw_response: raw,
        stripped_response: stripped,
        latency_ms,
        error,
    };
    Ok((record, prediction, failed))
}

/// Re-scores a recorded run against a dataset; see the replay module.
pub fn replay_score<P: AsRef<Path>>(
    log_path: P,
    dataset: &Dataset,
) -> Result<MetricsReport, RunnerError> {
    Ok(replay::replay_score(log_path, dataset)?)
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset {0:?} has no train split for exemplar selection; add one or set [[prompt.exemplars]]")]
    MissingTrainSplit(String),
    #[error("io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
