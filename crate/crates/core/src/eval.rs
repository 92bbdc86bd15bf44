//! Accuracy metrics, confusion matrices, and the feature-selection sweep
//! harness.
//!
//! Micro accuracy (mAcc) is the fraction of correctly classified instances;
//! macro accuracy (MAcc) averages per-class accuracies over the classes
//! present in the truth labels.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::features::{build_vocabulary, rank_afr, rank_igr, select_top, RankMethod, TextField};
use crate::nb::{majority_baseline, train, FeatureGroupSpec};
use crate::{Error, Result};

/// Accuracy metrics plus the confusion matrix of one prediction run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub micro_accuracy: f64,
    pub macro_accuracy: f64,
    /// Classes present in the truth labels only.
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub confusion: Confusion,
}

/// Count matrix indexed `[truth][predicted]` over the sorted union of labels
/// seen in either vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// Computes mAcc, MAcc, per-class accuracies, and the confusion matrix.
pub fn evaluate(preds: &[String], truth: &[String]) -> Result<EvalReport> {
    if preds.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truth.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate zero instances".into()));
    }

    let mut classes: Vec<String> = preds.iter().chain(truth).cloned().collect();
    classes.sort_unstable();
    classes.dedup();
    let index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (p, t) in preds.iter().zip(truth) {
        counts[index[t.as_str()]][index[p.as_str()]] += 1;
    }

    let total: u64 = preds.len() as u64;
    let correct: u64 = (0..classes.len()).map(|i| counts[i][i]).sum();
    let micro = correct as f64 / total as f64;

    let mut per_class = BTreeMap::new();
    for (i, class) in classes.iter().enumerate() {
        let truth_count: u64 = counts[i].iter().sum();
        if truth_count > 0 {
            per_class.insert(class.clone(), counts[i][i] as f64 / truth_count as f64);
        }
    }
    let macro_acc = per_class.values().sum::<f64>() / per_class.len() as f64;

    Ok(EvalReport {
        micro_accuracy: micro,
        macro_accuracy: macro_acc,
        per_class_accuracy: per_class,
        confusion: Confusion { classes, counts },
    })
}

/// Per-class accuracies sorted descending, lexicographic tie-break.
pub fn per_class_report(preds: &[String], truth: &[String]) -> Result<Vec<(String, f64)>> {
    let report = evaluate(preds, truth)?;
    let mut rows: Vec<(String, f64)> = report.per_class_accuracy.into_iter().collect();
    rows.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(rows)
}

/// One sweep row: a (method, proportion) cell or a reference row.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepRowKind {
    Proportion { method: RankMethod, proportion: f64 },
    AllWords,
    Majority,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: SweepRowKind,
    pub micro_accuracy: Option<f64>,
    pub macro_accuracy: Option<f64>,
    pub error: Option<String>,
}

/// Rows of a feature-selection sweep plus the AllWords and Majority
/// reference rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// For each proportion: rank content features on `train`, keep the top
/// share, train a content NB, and evaluate on `dev`. Each row retrains from
/// scratch. Reference rows evaluate the full-vocabulary model and the
/// majority baseline.
pub fn sweep(
    train_corpus: &Corpus,
    dev: &Corpus,
    method: RankMethod,
    proportions: &[f64],
    alpha: f64,
    min_users: usize,
) -> Result<SweepResult> {
    if proportions.is_empty() {
        return Err(Error::InvalidArgument("no sweep proportions given".into()));
    }
    for pair in proportions.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidArgument(
                "sweep proportions must be strictly increasing".into(),
            ));
        }
    }
    if proportions[0] <= 0.0 || *proportions.last().unwrap() > 1.0 {
        return Err(Error::InvalidArgument(
            "sweep proportions must lie in (0, 1]".into(),
        ));
    }
    if dev.is_empty() {
        return Err(Error::InvalidArgument("dev corpus is empty".into()));
    }

    let truth: Vec<String> = dev.users.iter().map(|u| u.industry.clone()).collect();
    let vocab = build_vocabulary(train_corpus, TextField::Content, min_users)?;
    let ranking = match method {
        RankMethod::Igr => rank_igr(train_corpus, &vocab),
        RankMethod::Afr => rank_afr(train_corpus, &vocab),
    };

    let mut rows: Vec<SweepRow> = match ranking {
        Ok(ranking) => proportions
            .par_iter()
            .map(|&p| {
                let kind = SweepRowKind::Proportion {
                    method,
                    proportion: p,
                };
                match select_top(&ranking, p).and_then(|selected| {
                    run_content_row(train_corpus, dev, &truth, selected, alpha)
                }) {
                    Ok((micro, macro_acc)) => SweepRow {
                        kind,
                        micro_accuracy: Some(micro),
                        macro_accuracy: Some(macro_acc),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        kind,
                        micro_accuracy: None,
                        macro_accuracy: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect(),
        Err(e) => proportions
            .iter()
            .map(|&p| SweepRow {
                kind: SweepRowKind::Proportion {
                    method,
                    proportion: p,
                },
                micro_accuracy: None,
                macro_accuracy: None,
                error: Some(e.to_string()),
            })
            .collect(),
    };

    // AllWords reference row
    let all_row = match run_content_row(train_corpus, dev, &truth, vocab, alpha) {
        Ok((micro, macro_acc)) => SweepRow {
            kind: SweepRowKind::AllWords,
            micro_accuracy: Some(micro),
            macro_accuracy: Some(macro_acc),
            error: None,
        },
        Err(e) => SweepRow {
            kind: SweepRowKind::AllWords,
            micro_accuracy: None,
            macro_accuracy: None,
            error: Some(e.to_string()),
        },
    };
    rows.push(all_row);

    // Majority reference row
    let majority = majority_baseline(train_corpus)?;
    let preds: Vec<String> = vec![majority; dev.len()];
    let report = evaluate(&preds, &truth)?;
    rows.push(SweepRow {
        kind: SweepRowKind::Majority,
        micro_accuracy: Some(report.micro_accuracy),
        macro_accuracy: Some(report.macro_accuracy),
        error: None,
    });

    Ok(SweepResult { rows })
}

fn run_content_row(
    train_corpus: &Corpus,
    dev: &Corpus,
    truth: &[String],
    vocab: crate::features::Vocabulary,
    alpha: f64,
) -> Result<(f64, f64)> {
    let model = train(train_corpus, &[FeatureGroupSpec::bag(vocab)], alpha)?;
    let preds: Vec<String> = model
        .predict_many(&dev.users)
        .into_iter()
        .map(|p| p.label)
        .collect();
    let report = evaluate(&preds, truth)?;
    Ok((report.micro_accuracy, report.macro_accuracy))
}

/// Sweep export: `method,proportion,mAcc,MAcc`. Reference rows use
/// proportion `all` / `majority`; errored rows leave the metrics empty and
/// carry the message in a trailing `error` column left empty elsewhere.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "proportion", "mAcc", "MAcc", "error"])?;
    for row in &result.rows {
        let (method, proportion) = match &row.kind {
            SweepRowKind::Proportion { method, proportion } => {
                (method.to_string(), proportion.to_string())
            }
            SweepRowKind::AllWords => ("AllWords".to_string(), "all".to_string()),
            SweepRowKind::Majority => ("Majority".to_string(), "majority".to_string()),
        };
        wtr.write_record([
            method,
            proportion,
            row.micro_accuracy.map(|v| v.to_string()).unwrap_or_default(),
            row.macro_accuracy.map(|v| v.to_string()).unwrap_or_default(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}

/// Eval export: `metric,value` rows for mAcc and MAcc.
pub fn write_eval_csv<W: Write>(report: &EvalReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["metric", "value"])?;
    wtr.write_record(["mAcc", &report.micro_accuracy.to_string()])?;
    wtr.write_record(["MAcc", &report.macro_accuracy.to_string()])?;
    wtr.flush().map_err(|e| Error::io("<eval csv>", e))?;
    Ok(())
}

/// Per-class export: `class,accuracy`, sorted descending.
pub fn write_per_class_csv<W: Write>(rows: &[(String, f64)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["class", "accuracy"])?;
    for (class, acc) in rows {
        wtr.write_record([class.clone(), acc.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<per-class csv>", e))?;
    Ok(())
}

/// Confusion matrix export with a header row and column of class labels;
/// rows are truth, columns are predictions.
pub fn write_confusion_csv<W: Write>(confusion: &Confusion, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["truth\\predicted".to_string()];
    header.extend(confusion.classes.iter().cloned());
    wtr.write_record(&header)?;
    for (i, class) in confusion.classes.iter().enumerate() {
        let mut row = vec![class.clone()];
        row.extend(confusion.counts[i].iter().map(|c| c.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<confusion csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn all_correct_gives_ones() {
        let t = labels(&["A", "B", "C"]);
        let r = evaluate(&t, &t).unwrap();
        assert_eq!(r.micro_accuracy, 1.0);
        assert_eq!(r.macro_accuracy, 1.0);
        assert!(r.per_class_accuracy.values().all(|&a| a == 1.0));
    }

    #[test]
    fn skewed_example() {
        // truth has 9 A and 1 B, predictions all A
        let mut truth = vec!["A".to_string(); 9];
        truth.push("B".to_string());
        let preds = vec!["A".to_string(); 10];
        let r = evaluate(&preds, &truth).unwrap();
        assert!((r.micro_accuracy - 0.9).abs() < 1e-12);
        assert!((r.macro_accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_fatal() {
        assert!(matches!(
            evaluate(&labels(&["A"]), &labels(&["A", "B"])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn macro_excludes_classes_absent_from_truth() {
        // prediction introduces class C never seen in truth
        let truth = labels(&["A", "A", "B", "B"]);
        let preds = labels(&["A", "C", "B", "B"]);
        let r = evaluate(&preds, &truth).unwrap();
        assert_eq!(r.per_class_accuracy.len(), 2);
        assert!((r.macro_accuracy - 0.75).abs() < 1e-12);
        // but C still shows up in the confusion matrix
        assert!(r.confusion.classes.contains(&"C".to_string()));
    }

    #[test]
    fn confusion_rows_sum_to_truth_counts() {
        let truth = labels(&["A", "A", "B", "C", "C", "C"]);
        let preds = labels(&["B", "A", "B", "C", "A", "C"]);
        let r = evaluate(&preds, &truth).unwrap();
        for (i, class) in r.confusion.classes.iter().enumerate() {
            let row_sum: u64 = r.confusion.counts[i].iter().sum();
            let expected = truth.iter().filter(|t| *t == class).count() as u64;
            assert_eq!(row_sum, expected);
        }
    }

    #[test]
    fn micro_within_per_class_bounds() {
        let truth = labels(&["A", "A", "A", "B", "B", "C"]);
        let preds = labels(&["A", "A", "B", "B", "A", "C"]);
        let r = evaluate(&preds, &truth).unwrap();
        let min = r
            .per_class_accuracy
            .values()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let max = r
            .per_class_accuracy
            .values()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(r.micro_accuracy >= min - 1e-12);
        assert!(r.micro_accuracy <= max + 1e-12);
    }

    #[test]
    fn per_class_report_sorted_descending() {
        let truth = labels(&["A", "A", "B", "B", "C", "C"]);
        let preds = labels(&["A", "A", "B", "A", "A", "A"]);
        let rows = per_class_report(&preds, &truth).unwrap();
        assert_eq!(rows[0], ("A".to_string(), 1.0));
        assert_eq!(rows[1].0, "B");
        assert_eq!(rows[2], ("C".to_string(), 0.0));
    }

    #[test]
    fn absent_predicted_class_scores_zero() {
        let truth = labels(&["A", "B"]);
        let preds = labels(&["A", "A"]);
        let rows = per_class_report(&preds, &truth).unwrap();
        assert_eq!(rows.iter().find(|(c, _)| c == "B").unwrap().1, 0.0);
    }

    #[test]
    fn rebalancing_preserves_macro_not_micro() {
        // same per-class accuracies (A: 1.0, B: 0.5), different class mix
        let t1 = labels(&["A", "B", "B"]);
        let p1 = labels(&["A", "B", "A"]);
        let t2 = labels(&["A", "A", "A", "B", "B"]);
        let p2 = labels(&["A", "A", "A", "B", "A"]);
        let r1 = evaluate(&p1, &t1).unwrap();
        let r2 = evaluate(&p2, &t2).unwrap();
        assert!((r1.macro_accuracy - r2.macro_accuracy).abs() < 1e-12);
        assert!((r1.micro_accuracy - r2.micro_accuracy).abs() > 1e-3);
    }
}
