//! Scores a handful of model outputs directly, without running a backend.
//! Shows the per-sentence judgment (length check, 0-based error positions,
//! detection and correction hits) and the aggregated report.
//!
//! Run with: cargo run --example score_predictions

use csc_eval::backend::strip_response;
use csc_eval::eval::{aggregate, judge_sentence, Prediction};

fn main() {
    // raw model text goes through response stripping first: outer quotes and
    // trailing commentary lines are shed, interior text is untouched
    let raw_cases = [
        ("00001", "我真胡秃", "我真糊涂", "“我真糊涂”"),
        ("00002", "我们去看大河", "我们去看大湖", "我们去看大湖\n改了最后一个字。"),
        ("00003", "你们好", "你们好", "你们好"),
        ("00004", "河水真好", "海水真好", "河水真好"),
        ("00005", "希望你们好好的跳无", "希望你们好好的跳舞", "希望你们好好的跳舞了"),
    ];

    let predictions: Vec<Prediction> = raw_cases
        .iter()
        .map(|(id, source, gold, raw)| Prediction {
            id: id.to_string(),
            source: source.to_string(),
            gold: gold.to_string(),
            output: strip_response(raw).to_string(),
        })
        .collect();

    println!("id\tlen_ok\tgold_pos\tpred_pos\tdet\tcorr");
    let judgments: Vec<_> = predictions
        .iter()
        .map(|p| {
            let j = judge_sentence(p);
            println!(
                "{}\t{}\t{:?}\t{}\t{}\t{}",
                p.id,
                j.length_ok,
                j.gold_positions,
                match &j.pred_positions {
                    Some(pos) => format!("{pos:?}"),
                    None => "n/a (length mismatch)".to_string(),
                },
                j.detection_hit,
                j.correction_hit,
            );
            j
        })
        .collect();

    let report = aggregate(&judgments);
    println!("\naggregated:");
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
