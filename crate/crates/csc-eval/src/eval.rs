//! Sentence-level scoring. A sentence counts at the detection level only if
//! the model found exactly the erroneous positions, and at the correction
//! level only if it also produced the gold sentence. Outputs whose length
//! drifted from the source count as error-asserting misses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::differing_positions;

/// One model output paired with the dataset row it answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub id: String,
    pub source: String,
    pub gold: String,
    /// Stripped backend text; any length is possible.
    pub output: String,
}

/// Per-sentence verdict at both evaluation levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceJudgment {
    /// Output and source have the same character count.
    pub length_ok: bool,
    pub gold_positions: BTreeSet<usize>,
    /// Positions where output differs from source; `None` when the lengths
    /// differ and positionwise comparison is undefined.
    pub pred_positions: Option<BTreeSet<usize>>,
    pub detection_hit: bool,
    pub correction_hit: bool,
}

impl SentenceJudgment {
    pub fn is_erroneous(&self) -> bool {
        !self.gold_positions.is_empty()
    }

    /// The model asserted at least one error: it changed something, or it
    /// broke the length contract.
    pub fn asserts_errors(&self) -> bool {
        match &self.pred_positions {
            None => true,
            Some(pred) => !pred.is_empty(),
        }
    }
}

pub fn judge_sentence(p: &Prediction) -> SentenceJudgment {
    let length_ok = p.output.chars().count() == p.source.chars().count();
    let gold_positions = differing_positions(&p.source, &p.gold);
    let pred_positions = length_ok.then(|| differing_positions(&p.source, &p.output));
    let detection_hit = match &pred_positions {
        Some(pred) => *pred == gold_positions,
        None => false,
    };
    let correction_hit = length_ok && p.output == p.gold;
    SentenceJudgment {
        length_ok,
        gold_positions,
        pred_positions,
        detection_hit,
        correction_hit,
    }
}

/// Accuracy / precision / recall / F1 for one evaluation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LevelMetrics {
    const ZERO: LevelMetrics = LevelMetrics {
        accuracy: 0.0,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    pub fn values(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sentence_count: usize,
    pub detection: LevelMetrics,
    pub correction: LevelMetrics,
    /// Sentences whose output kept the source character count.
    pub length_unchanged_count: usize,
}

impl MetricsReport {
    pub fn empty() -> MetricsReport {
        MetricsReport {
            sentence_count: 0,
            detection: LevelMetrics::ZERO,
            correction: LevelMetrics::ZERO,
            length_unchanged_count: 0,
        }
    }

    pub fn values(&self) -> [f64; 8] {
        let d = self.detection.values();
        let c = self.correction.values();
        [d[0], d[1], d[2], d[3], c[0], c[1], c[2], c[3]]
    }
}

/// Aggregates judgments into the two-level report.
///
/// A sentence is a positive when it asserts any error; a true positive when
/// it additionally hits at the level under scoring. Accuracy credits hits on
/// erroneous sentences and untouched clean sentences. All ratios with a zero
/// denominator are 0 so the report is total.
pub fn aggregate(judgments: &[SentenceJudgment]) -> MetricsReport {
    let n = judgments.len();
    if n == 0 {
        return MetricsReport::empty();
    }
    let erroneous = judgments.iter().filter(|j| j.is_erroneous()).count();
    let positives = judgments.iter().filter(|j| j.asserts_errors()).count();
    let length_unchanged_count = judgments.iter().filter(|j| j.length_ok).count();
    let clean_untouched = judgments
        .iter()
        .filter(|j| !j.is_erroneous() && j.length_ok && !j.asserts_errors())
        .count();

    let level = |hit: fn(&SentenceJudgment) -> bool| {
        let true_positives = judgments
            .iter()
            .filter(|j| j.asserts_errors() && hit(j))
            .count();
        let hits_on_erroneous = judgments
            .iter()
            .filter(|j| j.is_erroneous() && hit(j))
            .count();
        let precision = ratio(true_positives, positives);
        let recall = ratio(true_positives, erroneous);
        LevelMetrics {
            accuracy: ratio(hits_on_erroneous + clean_untouched, n),
            precision,
            recall,
            f1: f1(precision, recall),
        }
    };

    MetricsReport {
        sentence_count: n,
        detection: level(|j| j.detection_hit),
        correction: level(|j| j.correction_hit),
        length_unchanged_count,
    }
}

fn ratio(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Counts length-preserving outputs in two runs over the same sentences,
/// for side-by-side comparison of prompt variants.
pub fn compare_length_consistency(
    run_a: &[Prediction],
    run_b: &[Prediction],
) -> Result<(usize, usize), EvalError> {
    let ids = |run: &[Prediction]| -> BTreeSet<String> {
        run.iter().map(|p| p.id.clone()).collect()
    };
    let ids_a = ids(run_a);
    let ids_b = ids(run_b);
    if ids_a != ids_b {
        let only_a: Vec<String> = ids_a.difference(&ids_b).cloned().collect();
        let only_b: Vec<String> = ids_b.difference(&ids_a).cloned().collect();
        return Err(EvalError::IdSetMismatch { only_a, only_b });
    }
    let count = |run: &[Prediction]| {
        run.iter()
            .filter(|p| p.output.chars().count() == p.source.chars().count())
            .count()
    };
    Ok((count(run_a), count(run_b)))
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("runs cover different sentence ids (only in a: {only_a:?}; only in b: {only_b:?})")]
    IdSetMismatch {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },
}
