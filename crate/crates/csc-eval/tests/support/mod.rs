//! Shared helpers for integration tests, including a brute-force scorer
//! written directly from the metric definitions. The oracle never calls into
//! the library's scoring code: it recomputes everything from the raw
//! (source, gold, output) strings so the two implementations can only agree
//! by both being right.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLevel {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub n: usize,
    pub detection: OracleLevel,
    pub correction: OracleLevel,
    pub length_unchanged: usize,
}

struct Facts {
    length_ok: bool,
    erroneous: bool,
    asserts: bool,
    detection_hit: bool,
    correction_hit: bool,
}

/// Scores (source, gold, output) triples by direct enumeration of the
/// sentence-level definitions.
pub fn brute_force_score(rows: &[(String, String, String)]) -> OracleReport {
    let zero = OracleLevel {
        accuracy: 0.0,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    let n = rows.len();
    if n == 0 {
        return OracleReport {
            n: 0,
            detection: zero,
            correction: zero,
            length_unchanged: 0,
        };
    }

    let facts: Vec<Facts> = rows
        .iter()
        .map(|(source, gold, output)| {
            let s: Vec<char> = source.chars().collect();
            let g: Vec<char> = gold.chars().collect();
            let o: Vec<char> = output.chars().collect();
            assert_eq!(s.len(), g.len(), "oracle requires aligned source/gold");
            let length_ok = o.len() == s.len();
            let gold_positions: Vec<usize> = (0..s.len()).filter(|&i| s[i] != g[i]).collect();
            let erroneous = !gold_positions.is_empty();
            let (asserts, detection_hit) = if length_ok {
                let pred_positions: Vec<usize> =
                    (0..s.len()).filter(|&i| s[i] != o[i]).collect();
                (!pred_positions.is_empty(), pred_positions == gold_positions)
            } else {
                // a length violation asserts errors and can hit nothing
                (true, false)
            };
            let correction_hit = length_ok && o == g;
            Facts {
                length_ok,
                erroneous,
                asserts,
                detection_hit,
                correction_hit,
            }
        })
        .collect();

    let erroneous_total = facts.iter().filter(|f| f.erroneous).count();
    let positives = facts.iter().filter(|f| f.asserts).count();
    let clean_untouched = facts
        .iter()
        .filter(|f| !f.erroneous && f.length_ok && !f.asserts)
        .count();
    let length_unchanged = facts.iter().filter(|f| f.length_ok).count();

    let score = |hits: Vec<bool>| -> OracleLevel {
        let true_positives = facts
            .iter()
            .zip(&hits)
            .filter(|(f, &hit)| f.asserts && hit)
            .count();
        let hits_on_erroneous = facts
            .iter()
            .zip(&hits)
            .filter(|(f, &hit)| f.erroneous && hit)
            .count();
        let precision = if positives == 0 {
            0.0
        } else {
            true_positives as f64 / positives as f64
        };
        let recall = if erroneous_total == 0 {
            0.0
        } else {
            true_positives as f64 / erroneous_total as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        OracleLevel {
            accuracy: (hits_on_erroneous + clean_untouched) as f64 / n as f64,
            precision,
            recall,
            f1,
        }
    };

    OracleReport {
        n,
        detection: score(facts.iter().map(|f| f.detection_hit).collect()),
        correction: score(facts.iter().map(|f| f.correction_hit).collect()),
        length_unchanged,
    }
}
