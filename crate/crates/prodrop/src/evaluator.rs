//! Micro-averaged precision/recall/F1 for slot detection and pronoun
//! prediction, plus agreement between two labeled corpora (for example
//! automatically projected labels versus manual ones).
//!
//! Matching is slot-exact: a detected slot counts only if the gold data
//! marks the same insertion position, and a prediction additionally
//! needs the same pronoun. Counts are pooled over the whole corpus
//! before any ratio is taken (micro averaging), so metrics are
//! invariant under sentence reordering.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::LabeledSentence;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction covers {left} sentences but gold covers {right}")]
    SentenceCountMismatch { left: usize, right: usize },
    #[error("sentence {index}: {left} tokens on one side, {right} on the other")]
    SentenceLengthMismatch {
        index: usize,
        left: usize,
        right: usize,
    },
}

/// Pooled counts with the derived ratios. `f1` is the harmonic mean of
/// precision and recall, computed with the count identity
/// `2tp / (2tp + fp + fn)` so exact-rational cases stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PRF {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PRF {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> PRF {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        PRF {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
        }
    }
}

fn check_counts<L, R>(pred: &[L], gold: &[R]) -> Result<(), EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::SentenceCountMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    Ok(())
}

fn pool_set_counts<T: Ord + Clone>(pred: &[Vec<T>], gold: &[Vec<T>]) -> (u64, u64, u64) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let p: BTreeSet<T> = p.iter().cloned().collect();
        let g: BTreeSet<T> = g.iter().cloned().collect();
        tp += p.intersection(&g).count() as u64;
        fp += p.difference(&g).count() as u64;
        fn_ += g.difference(&p).count() as u64;
    }
    (tp, fp, fn_)
}

/// Detection quality: a predicted insertion slot is a true positive iff
/// the gold data drops a pronoun at the same slot, regardless of which
/// pronoun. Inputs are per-sentence slot lists with set semantics
/// (duplicates count once).
pub fn eval_detection(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> Result<PRF, EvalError> {
    check_counts(pred, gold)?;
    let (tp, fp, fn_) = pool_set_counts(pred, gold);
    Ok(PRF::from_counts(tp, fp, fn_))
}

/// Prediction quality: a (slot, pronoun) pair is a true positive only
/// when both components match the gold pair, so a correct slot with the
/// wrong pronoun costs one false positive and one false negative.
pub fn eval_prediction(
    pred: &[Vec<(usize, String)>],
    gold: &[Vec<(usize, String)>],
) -> Result<PRF, EvalError> {
    check_counts(pred, gold)?;
    let (tp, fp, fn_) = pool_set_counts(pred, gold);
    Ok(PRF::from_counts(tp, fp, fn_))
}

/// Slot-decision agreement between two labelings of the same text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    /// Fraction of slots where both sides make the same drop/no-drop
    /// decision.
    pub detection: f64,
    /// As `detection`, but slots both sides mark as dropped must also
    /// agree on the pronoun (first annotation at the slot).
    pub generation: f64,
    pub total_slots: u64,
}

/// Compares two labeled corpora slot by slot. Every insertion slot of
/// every sentence (`len + 1` per sentence) is one decision.
pub fn agreement(auto: &[LabeledSentence], manual: &[LabeledSentence]) -> Result<Agreement, EvalError> {
    check_counts(auto, manual)?;
    let mut total = 0u64;
    let mut detection_matches = 0u64;
    let mut generation_matches = 0u64;
    for (index, (a, m)) in auto.iter().zip(manual).enumerate() {
        if a.sentence.len() != m.sentence.len() {
            return Err(EvalError::SentenceLengthMismatch {
                index,
                left: a.sentence.len(),
                right: m.sentence.len(),
            });
        }
        for slot in 0..=a.sentence.len() {
            total += 1;
            let ap = a.pronouns_at(slot);
            let mp = m.pronouns_at(slot);
            if ap.is_empty() == mp.is_empty() {
                detection_matches += 1;
                if ap.first() == mp.first() {
                    generation_matches += 1;
                }
            }
        }
    }
    let frac = |n: u64| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    Ok(Agreement {
        detection: frac(detection_matches),
        generation: frac(generation_matches),
        total_slots: total,
    })
}

// --------------------------------------------------------------- report

/// Everything the `evaluate` front-end reports for a pair of labeled
/// corpora: detection PRF, prediction PRF, and agreement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub detection: PRF,
    pub prediction: PRF,
    pub agreement: Agreement,
}

/// Scores an automatically labeled corpus against a gold labeling of
/// the same sentences.
pub fn evaluate_labels(
    auto: &[LabeledSentence],
    gold: &[LabeledSentence],
) -> Result<EvalReport, EvalError> {
    let slots = |xs: &[LabeledSentence]| -> Vec<Vec<usize>> {
        xs.iter()
            .map(|s| s.annotations().iter().map(|a| a.position).collect())
            .collect()
    };
    let pairs = |xs: &[LabeledSentence]| -> Vec<Vec<(usize, String)>> {
        xs.iter()
            .map(|s| {
                s.annotations()
                    .iter()
                    .map(|a| (a.position, a.pronoun.clone()))
                    .collect()
            })
            .collect()
    };
    Ok(EvalReport {
        detection: eval_detection(&slots(auto), &slots(gold))?,
        prediction: eval_prediction(&pairs(auto), &pairs(gold))?,
        agreement: agreement(auto, gold)?,
    })
}

/// Renders the report as aligned-column text for humans followed by a
/// `key=value` block for machines (floats in shortest round-trip form).
pub fn render_report(report: &EvalReport) -> String {
    let rows = [
        ("detection", &report.detection),
        ("prediction", &report.prediction),
    ];
    let mut out = String::new();
    out.push_str(&format!(
        "{:<11} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}\n",
        "task", "tp", "fp", "fn", "precision", "recall", "f1"
    ));
    for (name, prf) in rows {
        out.push_str(&format!(
            "{:<11} {:>8} {:>8} {:>8} {:>10.4} {:>10.4} {:>10.4}\n",
            name,
            prf.true_positives,
            prf.false_positives,
            prf.false_negatives,
            prf.precision,
            prf.recall,
            prf.f1
        ));
    }
    out.push_str(&format!(
        "{:<11} {:>8} slots, detection {:.4}, generation {:.4}\n",
        "agreement", report.agreement.total_slots, report.agreement.detection,
        report.agreement.generation
    ));
    out.push('\n');
    for (name, prf) in rows {
        out.push_str(&format!("{name}.tp={}\n", prf.true_positives));
        out.push_str(&format!("{name}.fp={}\n", prf.false_positives));
        out.push_str(&format!("{name}.fn={}\n", prf.false_negatives));
        out.push_str(&format!("{name}.precision={}\n", prf.precision));
        out.push_str(&format!("{name}.recall={}\n", prf.recall));
        out.push_str(&format!("{name}.f1={}\n", prf.f1));
    }
    out.push_str(&format!("agreement.slots={}\n", report.agreement.total_slots));
    out.push_str(&format!("agreement.detection={}\n", report.agreement.detection));
    out.push_str(&format!("agreement.generation={}\n", report.agreement.generation));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DPAnnotation, Sentence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prf(tp: u64, fp: u64, fn_: u64) -> PRF {
        PRF::from_counts(tp, fp, fn_)
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let gold = vec![vec![0, 2], vec![], vec![1]];
        let got = eval_detection(&gold, &gold).unwrap();
        assert_eq!(got.precision, 1.0);
        assert_eq!(got.recall, 1.0);
        assert_eq!(got.f1, 1.0);
    }

    /// Frozen arithmetic oracle: tp=2 fp=1 fn=2 must give exactly the
    /// rationals 2/3, 1/2, and 4/7 in IEEE double.
    #[test]
    fn hand_counts_give_exact_rationals() {
        let got = prf(2, 1, 2);
        assert_eq!(got.precision, 2.0 / 3.0);
        assert_eq!(got.recall, 0.5);
        assert_eq!(got.f1, 4.0 / 7.0);
    }

    #[test]
    fn detection_pools_counts_micro() {
        // sentence 1: pred {0,1} gold {1,2} -> tp 1 fp 1 fn 1
        // sentence 2: pred {3}  gold {}    -> fp 1
        // sentence 3: pred {}   gold {4}   -> fn 1
        let pred = vec![vec![0, 1], vec![3], vec![]];
        let gold = vec![vec![1, 2], vec![], vec![4]];
        let got = eval_detection(&pred, &gold).unwrap();
        assert_eq!(
            (got.true_positives, got.false_positives, got.false_negatives),
            (1, 2, 2)
        );
    }

    #[test]
    fn duplicate_slots_count_once() {
        let pred = vec![vec![1, 1, 1]];
        let gold = vec![vec![1]];
        let got = eval_detection(&pred, &gold).unwrap();
        assert_eq!(
            (got.true_positives, got.false_positives, got.false_negatives),
            (1, 0, 0)
        );
    }

    #[test]
    fn wrong_pronoun_costs_both_fp_and_fn() {
        let pred = vec![vec![(0usize, "我".to_string())]];
        let gold = vec![vec![(0usize, "你".to_string())]];
        let got = eval_prediction(&pred, &gold).unwrap();
        assert_eq!(
            (got.true_positives, got.false_positives, got.false_negatives),
            (0, 1, 1)
        );
    }

    #[test]
    fn metrics_are_reorder_invariant() {
        let pred = vec![vec![0, 1], vec![3], vec![]];
        let gold = vec![vec![1, 2], vec![], vec![4]];
        let a = eval_detection(&pred, &gold).unwrap();
        let pred2 = vec![pred[2].clone(), pred[0].clone(), pred[1].clone()];
        let gold2 = vec![gold[2].clone(), gold[0].clone(), gold[1].clone()];
        let b = eval_detection(&pred2, &gold2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_denominators_are_zero_not_nan() {
        let got = prf(0, 0, 0);
        assert_eq!((got.precision, got.recall, got.f1), (0.0, 0.0, 0.0));
        let empty = eval_detection(&[vec![]], &[vec![]]).unwrap();
        assert_eq!(empty.f1, 0.0);
    }

    #[test]
    fn f1_is_zero_iff_no_true_positives() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let tp = rng.gen_range(0..5u64);
            let fp = rng.gen_range(0..5u64);
            let fn_ = rng.gen_range(0..5u64);
            let got = prf(tp, fp, fn_);
            assert_eq!(got.f1 == 0.0, tp == 0, "tp={tp} fp={fp} fn={fn_}");
            assert!(got.f1 >= 0.0 && got.f1 <= 1.0);
            assert!(got.f1 <= got.precision.max(got.recall) + 1e-15);
        }
    }

    /// Pronoun matching is strictly stronger than slot matching, so
    /// prediction F1 can never exceed detection F1 on the same slots.
    #[test]
    fn prediction_f1_never_beats_detection_f1() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pronouns = ["我", "你", "他"];
        for _ in 0..300 {
            let sentences = rng.gen_range(1..5);
            let mut pred_pairs = Vec::new();
            let mut gold_pairs = Vec::new();
            for _ in 0..sentences {
                let mut p = Vec::new();
                let mut g = Vec::new();
                for slot in 0..rng.gen_range(0..6usize) {
                    if rng.gen_bool(0.5) {
                        p.push((slot, pronouns[rng.gen_range(0..3)].to_string()));
                    }
                    if rng.gen_bool(0.5) {
                        g.push((slot, pronouns[rng.gen_range(0..3)].to_string()));
                    }
                }
                pred_pairs.push(p);
                gold_pairs.push(g);
            }
            let slots = |xs: &[Vec<(usize, String)>]| -> Vec<Vec<usize>> {
                xs.iter()
                    .map(|s| s.iter().map(|(p, _)| *p).collect())
                    .collect()
            };
            let det = eval_detection(&slots(&pred_pairs), &slots(&gold_pairs)).unwrap();
            let pre = eval_prediction(&pred_pairs, &gold_pairs).unwrap();
            assert!(
                pre.f1 <= det.f1 + 1e-15,
                "prediction {} > detection {}",
                pre.f1,
                det.f1
            );
        }
    }

    #[test]
    fn mismatched_sentence_counts_are_rejected() {
        assert!(matches!(
            eval_detection(&[vec![0]], &[]),
            Err(EvalError::SentenceCountMismatch { left: 1, right: 0 })
        ));
        assert!(matches!(
            eval_prediction(&[], &[vec![]]),
            Err(EvalError::SentenceCountMismatch { left: 0, right: 1 })
        ));
    }

    // ---- agreement ----

    fn labeled(text: &str, drops: &[(usize, &str)]) -> LabeledSentence {
        let annotations = drops
            .iter()
            .map(|(position, pronoun)| DPAnnotation {
                position: *position,
                pronoun: pronoun.to_string(),
                trigger: None,
            })
            .collect();
        LabeledSentence::new(Sentence::from_line(text, 0).unwrap(), annotations).unwrap()
    }

    #[test]
    fn identical_streams_agree_fully() {
        let xs = vec![labeled("吃 饭", &[(0, "我")]), labeled("走 了", &[])];
        let got = agreement(&xs, &xs).unwrap();
        assert_eq!(got.detection, 1.0);
        assert_eq!(got.generation, 1.0);
        assert_eq!(got.total_slots, 6); // (2+1) + (2+1)
    }

    #[test]
    fn nine_of_ten_slots_agree() {
        // two 4-token sentences: 10 slots total; one slot decision flips
        let auto = vec![
            labeled("a b c d", &[(0, "我")]),
            labeled("e f g h", &[(2, "你")]),
        ];
        let manual = vec![
            labeled("a b c d", &[(0, "我")]),
            labeled("e f g h", &[]),
        ];
        let got = agreement(&auto, &manual).unwrap();
        assert_eq!(got.total_slots, 10);
        assert_eq!(got.detection, 0.9);
        assert_eq!(got.generation, 0.9);
    }

    #[test]
    fn generation_agreement_also_needs_the_pronoun() {
        let auto = vec![labeled("a b", &[(1, "我")])];
        let manual = vec![labeled("a b", &[(1, "你")])];
        let got = agreement(&auto, &manual).unwrap();
        assert_eq!(got.detection, 1.0); // both mark slot 1 dropped
        assert_eq!(got.generation, 2.0 / 3.0); // but disagree on the pronoun
        assert!(got.generation <= got.detection);
    }

    #[test]
    fn agreement_rejects_misaligned_streams() {
        let a = vec![labeled("a b", &[])];
        assert!(matches!(
            agreement(&a, &[]),
            Err(EvalError::SentenceCountMismatch { .. })
        ));
        let b = vec![labeled("a b c", &[])];
        assert!(matches!(
            agreement(&a, &b),
            Err(EvalError::SentenceLengthMismatch {
                index: 0,
                left: 2,
                right: 3
            })
        ));
    }

    #[test]
    fn report_covers_all_metrics_in_both_forms() {
        let auto = vec![labeled("a b c", &[(0, "我"), (2, "你")])];
        let gold = vec![labeled("a b c", &[(0, "我"), (1, "他")])];
        let report = evaluate_labels(&auto, &gold).unwrap();
        assert_eq!(report.detection.true_positives, 1);
        assert_eq!(report.prediction.true_positives, 1);
        let text = render_report(&report);
        // aligned human block and key=value machine block coexist
        assert!(text.contains("precision"));
        assert!(text.contains("detection.f1="));
        assert!(text.contains("agreement.generation="));
        // machine block floats parse back to the exact stored values
        for line in text.lines() {
            if let Some((key, value)) = line.split_once('=') {
                let v: f64 = value.parse().unwrap();
                if key == "detection.f1" {
                    assert_eq!(v, report.detection.f1);
                }
            }
        }
        // deterministic rendering
        assert_eq!(text, render_report(&report));
    }
}
