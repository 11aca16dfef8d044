//! Run reports: one record per (dataset, regime, feature-set) cell holding
//! the raw metrics, a percentage rendering rounded to one decimal for
//! table-style reading, and run bookkeeping. Emitted as JSON plus a CSV of
//! F1-by-regime trend data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::{LevelMetrics, MetricsReport};
use crate::prompt::Regime;

/// Eight metrics ×100, rounded to one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayMetrics {
    pub detection: DisplayLevel,
    pub correction: DisplayLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayLevel {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// 0.31123 -> 31.1
pub fn percent_one_decimal(value: f64) -> f64 {
    (value * 1000.0).round() / 10.0
}

fn display_level(level: &LevelMetrics) -> DisplayLevel {
    DisplayLevel {
        accuracy: percent_one_decimal(level.accuracy),
        precision: percent_one_decimal(level.precision),
        recall: percent_one_decimal(level.recall),
        f1: percent_one_decimal(level.f1),
    }
}

pub fn display_metrics(report: &MetricsReport) -> DisplayMetrics {
    DisplayMetrics {
        detection: display_level(&report.detection),
        correction: display_level(&report.correction),
    }
}

/// One grid cell of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dataset: String,
    pub regime: Regime,
    /// Canonical feature-set rendering, e.g. "phonetic+radical" or "none".
    pub features: String,
    pub metrics: MetricsReport,
    pub display: DisplayMetrics,
    /// Sentences whose backend call failed and were scored as empty outputs.
    pub failure_count: usize,
    /// Replay log file name, relative to the report.
    pub replay_log: String,
}

impl CellReport {
    pub fn new(
        dataset: &str,
        regime: Regime,
        features: &str,
        metrics: MetricsReport,
        failure_count: usize,
        replay_log: &str,
    ) -> CellReport {
        CellReport {
            dataset: dataset.to_string(),
            regime,
            features: features.to_string(),
            metrics,
            display: display_metrics(&metrics),
            failure_count,
            replay_log: replay_log.to_string(),
        }
    }
}

/// Run-level bookkeeping recorded alongside the cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub backend_kind: String,
    pub model_name: String,
    pub template: String,
    pub workers: usize,
    pub seed: u64,
    pub strip_responses: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: RunMeta,
    pub cells: Vec<CellReport>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report must serialize");
        json.push('\n');
        json
    }

    pub fn from_json(text: &str) -> Result<RunReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// F1-by-regime trend rows, full precision.
    pub fn to_csv(&self) -> String {
        let mut csv = String::from("dataset,regime,features,detection_f1,correction_f1\n");
        for cell in &self.cells {
            writeln!(
                csv,
                "{},{},{},{},{}",
                cell.dataset,
                cell.regime.name(),
                cell.features,
                cell.metrics.detection.f1,
                cell.metrics.correction.f1
            )
            .expect("writing to a String cannot fail");
        }
        csv
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let json_path = dir.join("report.json");
        let csv_path = dir.join("report.csv");
        fs::write(&json_path, self.to_json())?;
        fs::write(&csv_path, self.to_csv())?;
        Ok((json_path, csv_path))
    }

    pub fn total_failures(&self) -> usize {
        self.cells.iter().map(|c| c.failure_count).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{aggregate, judge_sentence, Prediction};

    fn sample_metrics() -> MetricsReport {
        let predictions = [
            Prediction {
                id: "1".into(),
                source: "我真胡秃".into(),
                gold: "我真糊涂".into(),
                output: "我真糊涂".into(),
            },
            Prediction {
                id: "2".into(),
                source: "跳无".into(),
                gold: "跳舞".into(),
                output: "跳无".into(),
            },
            Prediction {
                id: "3".into(),
                source: "你好".into(),
                gold: "你好".into(),
                output: "你好".into(),
            },
        ];
        let judgments: Vec<_> = predictions.iter().map(judge_sentence).collect();
        aggregate(&judgments)
    }

    #[test]
    fn percent_rounding_matches_table_presentation() {
        assert_eq!(percent_one_decimal(0.31123), 31.1);
        assert_eq!(percent_one_decimal(0.28551), 28.6);
        assert_eq!(percent_one_decimal(1.0), 100.0);
        assert_eq!(percent_one_decimal(0.0), 0.0);
        assert_eq!(percent_one_decimal(2.0 / 3.0), 66.7);
    }

    #[test]
    fn report_round_trips_through_json() {
        let metrics = sample_metrics();
        let report = RunReport {
            meta: RunMeta {
                backend_kind: "mock_echo".into(),
                model_name: "gpt-3.5-turbo".into(),
                template: "zh".into(),
                workers: 4,
                seed: 0,
                strip_responses: true,
            },
            cells: vec![CellReport::new(
                "small",
                Regime::FewShot,
                "phonetic+radical",
                metrics,
                0,
                "replay-small-few_shot-phonetic+radical.jsonl",
            )],
        };
        let parsed = RunReport::from_json(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let metrics = sample_metrics();
        let report = RunReport {
            meta: RunMeta {
                backend_kind: "mock_echo".into(),
                model_name: "m".into(),
                template: "zh".into(),
                workers: 1,
                seed: 0,
                strip_responses: true,
            },
            cells: vec![
                CellReport::new("a", Regime::ZeroShot, "none", metrics, 0, "l1"),
                CellReport::new("a", Regime::FewShot, "phonetic", metrics, 1, "l2"),
            ],
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "dataset,regime,features,detection_f1,correction_f1");
        assert!(lines[1].starts_with("a,zero_shot,none,"));
        assert!(lines[2].starts_with("a,few_shot,phonetic,"));
    }

    #[test]
    fn display_metrics_scale_the_raw_values() {
        let metrics = sample_metrics();
        let display = display_metrics(&metrics);
        assert_eq!(display.detection.precision, percent_one_decimal(metrics.detection.precision));
        assert_eq!(display.correction.f1, percent_one_decimal(metrics.correction.f1));
    }
}
