//! Confusion counts, balanced accuracy and precision-recall curves.
//! Close is the positive class throughout.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify, BaggedEnsemble};
use crate::table::FeatureTable;
use crate::types::ProximityClass;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub n: usize,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tpr: f64,
    pub tnr: f64,
    pub balanced_accuracy: f64,
    pub pr_curve: Vec<PrPoint>,
}

pub fn balanced_accuracy(tpr: f64, tnr: f64) -> f64 {
    (tpr + tnr) / 2.0
}

fn rate(hit: usize, miss: usize) -> f64 {
    if hit + miss == 0 {
        0.0
    } else {
        hit as f64 / (hit + miss) as f64
    }
}

/// Confusion metrics at `threshold`. The PR curve is attached when both
/// classes are present (over the distinct scores, or `pr_grid` evenly spaced
/// thresholds when given).
pub fn evaluate_scores(
    scores: &[f64],
    labels: &[ProximityClass],
    threshold: f64,
    pr_grid: Option<usize>,
) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty set".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Validation("scores and labels differ in length".into()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (classify(s, threshold), l) {
            (ProximityClass::Close, ProximityClass::Close) => tp += 1,
            (ProximityClass::Close, ProximityClass::Far) => fp += 1,
            (ProximityClass::Far, ProximityClass::Far) => tn += 1,
            (ProximityClass::Far, ProximityClass::Close) => fn_ += 1,
        }
    }
    let (tpr, tnr) = (rate(tp, fn_), rate(tn, fp));
    let both = tp + fn_ > 0 && tn + fp > 0;
    Ok(EvalReport {
        threshold,
        n: scores.len(),
        tp,
        tn,
        fp,
        fn_,
        tpr,
        tnr,
        balanced_accuracy: balanced_accuracy(tpr, tnr),
        pr_curve: if both {
            pr_curve(scores, labels, pr_grid)?
        } else {
            Vec::new()
        },
    })
}

pub fn evaluate(
    model: &BaggedEnsemble,
    table: &FeatureTable,
    threshold: f64,
    pr_grid: Option<usize>,
) -> Result<EvalReport> {
    let scores = model.score_table(table)?;
    evaluate_scores(&scores, &table.labels, threshold, pr_grid)
}

/// Thresholds: 0, every distinct score (or an even grid over [0, 1]), 1, and,
/// if some score reaches 1, the next float above the highest score so the
/// curve always ends with no positive predictions. Sorted ascending.
pub fn pr_thresholds(scores: &[f64], grid: Option<usize>) -> Vec<f64> {
    let mut t = vec![0.0, 1.0];
    match grid {
        Some(n) if n >= 2 => t.extend((0..n).map(|i| i as f64 / (n - 1) as f64)),
        Some(_) => {}
        None => t.extend_from_slice(scores),
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max >= 1.0 {
        t.push(max.next_up());
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Precision (1 when nothing is predicted Close) and recall for each
/// threshold, predicting Close iff `score >= threshold`.
pub fn pr_curve(scores: &[f64], labels: &[ProximityClass], grid: Option<usize>) -> Result<Vec<PrPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::Validation("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Validation("scores must be finite".into()));
    }
    let positives = labels.iter().filter(|l| l.is_close()).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Validation("precision-recall curve needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    // close_above[k] = Close labels among sorted[k..]
    let mut close_above = vec![0usize; sorted.len() + 1];
    for k in (0..sorted.len()).rev() {
        close_above[k] = close_above[k + 1] + usize::from(labels[order[k]].is_close());
    }
    Ok(pr_thresholds(scores, grid)
        .into_iter()
        .map(|t| {
            let k = sorted.partition_point(|&s| s < t);
            let predicted = sorted.len() - k;
            let tp = close_above[k];
            PrPoint {
                threshold: t,
                precision: if predicted == 0 {
                    1.0
                } else {
                    tp as f64 / predicted as f64
                },
                recall: tp as f64 / positives as f64,
            }
        })
        .collect())
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let pct = |v: f64| format!("{:.2}%", 100.0 * v);
        let rows = [
            ("threshold", format!("{}", self.threshold)),
            ("samples", self.n.to_string()),
            ("true positives", self.tp.to_string()),
            ("true negatives", self.tn.to_string()),
            ("false positives", self.fp.to_string()),
            ("false negatives", self.fn_.to_string()),
            ("TP rate", pct(self.tpr)),
            ("TN rate", pct(self.tnr)),
            ("balanced accuracy", pct(self.balanced_accuracy)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>10}");
        }
        out
    }
}

/// Tab-separated `threshold precision recall` lines with a header.
pub fn pr_points_tsv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold\tprecision\trecall\n");
    for p in points {
        let _ = writeln!(out, "{}\t{}\t{}", p.threshold, p.precision, p.recall);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProximityClass::{Close, Far};

    #[test]
    fn balanced_accuracy_matches_published_rows() {
        assert!((100.0 * balanced_accuracy(0.7576, 0.4247) - 59.115).abs() < 1e-9);
        assert!((100.0 * balanced_accuracy(0.8412, 0.7166) - 77.89).abs() < 1e-9);
    }

    #[test]
    fn confusion_counts() {
        let scores = [0.9, 0.5, 0.2, 0.7, 0.1];
        let labels = [Close, Close, Close, Far, Far];
        let r = evaluate_scores(&scores, &labels, 0.5, None).unwrap();
        assert_eq!((r.tp, r.fn_, r.fp, r.tn), (2, 1, 1, 1));
        assert!((r.tpr - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.tnr, 0.5);
        assert!(evaluate_scores(&[], &[], 0.5, None).is_err());
    }

    #[test]
    fn perfect_classifier() {
        let r = evaluate_scores(&[1.0, 0.8, 0.1, 0.0], &[Close, Close, Far, Far], 0.5, None).unwrap();
        assert_eq!(r.balanced_accuracy, 1.0);
    }

    #[test]
    fn curve_endpoints() {
        let scores = [0.2, 0.4, 0.4, 0.9];
        let labels = [Far, Close, Far, Close];
        let c = pr_curve(&scores, &labels, None).unwrap();
        let t: Vec<f64> = c.iter().map(|p| p.threshold).collect();
        assert_eq!(t, vec![0.0, 0.2, 0.4, 0.9, 1.0]);
        assert_eq!(c[0].recall, 1.0);
        assert_eq!(c[0].precision, 0.5);
        assert_eq!(c[2].precision, 2.0 / 3.0);
        let last = c.last().unwrap();
        assert_eq!((last.recall, last.precision), (0.0, 1.0));
        assert!(pr_curve(&scores, &[Far; 4], None).is_err());
    }

    #[test]
    fn endpoint_above_score_of_one() {
        let c = pr_curve(&[1.0, 0.0], &[Close, Far], None).unwrap();
        let last = c.last().unwrap();
        assert!(last.threshold > 1.0);
        assert_eq!((last.recall, last.precision), (0.0, 1.0));
        assert_eq!(c[c.len() - 2].recall, 1.0);
    }

    #[test]
    fn grid_thresholds() {
        let t = pr_thresholds(&[0.3, 0.6], Some(11));
        assert_eq!(t.len(), 11);
        assert_eq!(t[3], 0.3);
    }

    #[test]
    fn report_formats() {
        let r = evaluate_scores(&[0.9, 0.1], &[Close, Far], 0.5, None).unwrap();
        let json = r.to_json();
        assert!(json.contains("\"fn\": 0"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(r.to_text().contains("balanced accuracy"));
        assert!(pr_points_tsv(&r.pr_curve).starts_with("threshold\tprecision\trecall\n0\t0.5\t1\n"));
    }
}
