//! Classification metrics over the positive (high risk / LLTE) class.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dataset::Prediction;
use super::PredictError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn from_decisions(predicted: impl IntoIterator<Item = bool>, labels: &[bool]) -> Self {
        let mut m = Self::default();
        for (p, &y) in predicted.into_iter().zip(labels) {
            match (p, y) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, true) => m.fn_ += 1,
                (false, false) => m.tn += 1,
            }
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when there are no positive labels.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive.
    pub threshold: f64,
}

/// Undefined metrics serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub roc_points: Vec<RocPoint>,
}

/// ROC sweep over every distinct score plus the 0 and 1 endpoints, highest
/// threshold first. Empty unless both classes are present.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Vec<RocPoint> {
    let pos = labels.iter().filter(|&&y| y).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut thresholds: Vec<f64> = scores.iter().copied().chain([0.0, 1.0]).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points = Vec::with_capacity(thresholds.len() + 1);
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut cursor = 0;
    for t in thresholds {
        while cursor < order.len() && scores[order[cursor]] >= t {
            if labels[order[cursor]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            cursor += 1;
        }
        points.push(RocPoint { fpr: fp / neg, tpr: tp / pos, threshold: t });
    }
    if points.first().is_some_and(|p| p.fpr > 0.0 || p.tpr > 0.0) {
        points.insert(0, RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY });
    }
    points
}

/// Trapezoidal area under a ROC curve.
pub fn auc(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5).sum()
}

pub fn evaluate(predictions: &[Prediction], labels: &[bool]) -> Result<MetricReport, PredictError> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(PredictError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
    }
    let confusion = ConfusionMatrix::from_decisions(predictions.iter().map(|p| p.positive), labels);
    let scores: Vec<f64> = predictions.iter().map(|p| p.probability).collect();
    let roc_points = roc_curve(&scores, labels);
    Ok(MetricReport {
        n: labels.len(),
        accuracy: confusion.accuracy(),
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        auc: (!roc_points.is_empty()).then(|| auc(&roc_points)),
        confusion,
        roc_points,
    })
}

/// `fpr,tpr,threshold` rows.
pub fn write_roc_csv<W: Write>(out: W, points: &[RocPoint], comments: &[String]) -> std::io::Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "fpr,tpr,threshold")?;
    for p in points {
        writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decisions(tp: usize, fp: usize, fn_: usize, tn: usize) -> (Vec<Prediction>, Vec<bool>) {
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for (n, p, y) in [(tp, true, true), (fp, true, false), (fn_, false, true), (tn, false, false)] {
            for _ in 0..n {
                preds.push(Prediction { probability: if p { 0.9 } else { 0.1 }, positive: p });
                labels.push(y);
            }
        }
        (preds, labels)
    }

    #[test]
    fn confusion_arithmetic() {
        let (p, y) = decisions(9, 1, 3, 7);
        let r = evaluate(&p, &y).unwrap();
        assert_eq!(r.precision, Some(0.9));
        assert_eq!(r.recall, Some(0.75));
        assert!((r.f1.unwrap() - 0.8181818181818181).abs() < 1e-12);
        assert_eq!(r.accuracy, 0.8);
    }

    #[test]
    fn undefined_metrics_are_none() {
        let (p, y) = decisions(0, 2, 0, 3);
        let r = evaluate(&p, &y).unwrap();
        assert_eq!(r.recall, None);
        assert_eq!(r.f1, None);
        assert_eq!(r.auc, None);
        assert_eq!(r.precision, Some(0.0));
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["recall"].is_null());
        assert!(evaluate(&p, &y[..2]).is_err());
        assert!(evaluate(&[], &[]).is_err());
    }

    #[test]
    fn roc_endpoints_and_perfect_auc() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let labels = [true, true, false, false];
        let roc = roc_curve(&scores, &labels);
        assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr, last.threshold), (1.0, 1.0, 0.0));
        assert_eq!(auc(&roc), 1.0);
        // Scores equal to 1 need an explicit origin.
        let roc = roc_curve(&[1.0, 0.0], &[true, false]);
        assert_eq!(roc[0].threshold, f64::INFINITY);
        assert_eq!(auc(&roc), 1.0);
    }

    #[test]
    fn tied_scores_give_diagonal() {
        let roc = roc_curve(&[0.5; 4], &[true, false, true, false]);
        assert_eq!(auc(&roc), 0.5);
    }
}
