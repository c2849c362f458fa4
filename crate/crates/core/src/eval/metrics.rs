use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Confusion counts (UTI positive) and macro-averaged scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let precision = 0.5 * (ratio(tp, tp + fp) + ratio(tn, tn + fn_));
        let recall = 0.5 * (ratio(tp, tp + fn_) + ratio(tn, tn + fp));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            tp,
            tn,
            fp,
            fn_,
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            precision,
            recall,
            f1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Precision and recall are averaged over both classes; an empty class scores 0.
pub fn compute_metrics(y_true: &[Label], y_pred: &[Label]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label vectors"));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t.is_positive(), p.is_positive()) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, tn, fp, fn_))
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Summary::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{NonUti, Uti};

    #[test]
    fn hand_evaluated_case() {
        let m = compute_metrics(&[Uti, Uti, NonUti, NonUti], &[Uti, NonUti, Uti, NonUti]).unwrap();
        assert_eq!((m.tp, m.fn_, m.fp, m.tn), (1, 1, 1, 1));
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn perfect() {
        let m = compute_metrics(&[Uti, NonUti], &[Uti, NonUti]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictors_on_24_36() {
        let truth: Vec<Label> = (0..60).map(|i| if i < 24 { Uti } else { NonUti }).collect();
        let neg = compute_metrics(&truth, &[NonUti; 60]).unwrap();
        assert!((neg.precision - 0.30).abs() < 1e-12);
        assert_eq!(neg.recall, 0.5);
        assert!((neg.f1 - 0.375).abs() < 1e-12);
        assert!((neg.accuracy - 0.60).abs() < 1e-12);
        let pos = compute_metrics(&truth, &[Uti; 60]).unwrap();
        assert!((pos.accuracy - 0.40).abs() < 1e-12);
        assert!((pos.precision - 0.20).abs() < 1e-12);
        assert_eq!(pos.recall, 0.5);
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_metrics(&[Uti], &[]).is_err());
    }

    #[test]
    fn summary() {
        let s = Summary::of([1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }
}
