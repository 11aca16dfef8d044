//! Replay logs: one JSON line per sentence recording the exact transcript
//! sent, the raw and stripped responses, and any backend failure. A log is
//! sufficient to re-score a run offline, so live results are never lost to
//! scoring-code changes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::eval::{aggregate, judge_sentence, MetricsReport, Prediction};
use crate::prompt::Transcript;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub id: String,
    pub transcript: Transcript,
    /// Backend text before any cleanup; empty when the sentence failed.
    pub raw_response: String,
    /// The text that was scored.
    pub stripped_response: String,
    pub latency_ms: u64,
    /// Backend failure description; a failed sentence scores as an empty
    /// output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Streaming, thread-shared log writer. Records appear in completion order;
/// scoring sorts by id, so line order never affects reports.
pub struct ReplayWriter {
    out: Mutex<BufWriter<File>>,
    path: PathBuf,
}

impl ReplayWriter {
    pub fn create<P: AsRef<Path>>(path: P) -> Result<ReplayWriter, ReplayError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| ReplayError::Io {
            path: path.clone(),
            source: e,
        })?;
        Ok(ReplayWriter {
            out: Mutex::new(BufWriter::new(file)),
            path,
        })
    }

    pub fn append(&self, record: &ReplayRecord) -> Result<(), ReplayError> {
        let line = serde_json::to_string(record).expect("replay record must serialize");
        let mut out = self.out.lock().expect("replay writer mutex poisoned");
        writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|e| ReplayError::Io {
            path: self.path.clone(),
            source: e,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn load_log<P: AsRef<Path>>(path: P) -> Result<Vec<ReplayRecord>, ReplayError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ReplayError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ReplayRecord =
            serde_json::from_str(line).map_err(|e| ReplayError::LogCorrupt {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Pairs every dataset sentence with its recorded response, by id. The log
/// must cover the dataset; records for unknown ids are ignored.
pub fn predictions_from_records(
    records: &[ReplayRecord],
    dataset: &Dataset,
) -> Result<Vec<Prediction>, ReplayError> {
    let by_id: BTreeMap<&str, &ReplayRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut predictions = Vec::with_capacity(dataset.len());
    for pair in dataset.pairs() {
        let record = by_id
            .get(pair.id.as_str())
            .ok_or_else(|| ReplayError::MissingRecord(pair.id.clone()))?;
        predictions.push(Prediction {
            id: pair.id.clone(),
            source: pair.source.clone(),
            gold: pair.gold.clone(),
            output: record.stripped_response.clone(),
        });
    }
    Ok(predictions)
}

/// Deterministically re-scores a recorded run against its dataset; no
/// network access.
pub fn replay_score<P: AsRef<Path>>(
    log_path: P,
    dataset: &Dataset,
) -> Result<MetricsReport, ReplayError> {
    let records = load_log(log_path)?;
    let predictions = predictions_from_records(&records, dataset)?;
    let judgments: Vec<_> = predictions.iter().map(judge_sentence).collect();
    Ok(aggregate(&judgments))
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("replay log has no record for sentence {0}")]
    MissingRecord(String),
    #[error("replay log line {line} is corrupt: {reason}")]
    LogCorrupt { line: usize, reason: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
