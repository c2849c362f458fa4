//! Wrapper feature selection scored by cross-validated F1.

use serde::{Deserialize, Serialize};

use crate::classifiers::FittedClassifier;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, kfold_split, train_indices};

/// One elimination round: the removed feature and the CV F1 of what remains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub removed: usize,
    pub remaining: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub n_features: usize,
    /// Sorted, unique indices into the full feature vector.
    pub selected: Vec<usize>,
    pub score: f64,
    pub trace: Vec<SelectionStep>,
}

impl FeatureSubset {
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        project(x, &self.selected)
    }

    /// The subset left after the first `rounds` trace steps.
    pub fn after(&self, rounds: usize) -> Vec<usize> {
        let removed: Vec<usize> = self.trace[..rounds].iter().map(|s| s.removed).collect();
        (0..self.n_features).filter(|i| !removed.contains(i)).collect()
    }
}

pub fn project(x: &[f64], features: &[usize]) -> Vec<f64> {
    features.iter().map(|&i| x[i]).collect()
}

/// Mean F1 over `folds` using only `features`.
pub fn cv_f1<F>(fit: &F, xs: &[Vec<f64>], ys: &[Label], features: &[usize], folds: &[Vec<usize>]) -> Result<f64>
where
    F: Fn(&[Vec<f64>], &[Label]) -> Result<FittedClassifier>,
{
    let mut total = 0.0;
    for f in 0..folds.len() {
        let train = train_indices(folds, f);
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| project(&xs[i], features)).collect();
        let ty: Vec<Label> = train.iter().map(|&i| ys[i]).collect();
        let model = fit(&tx, &ty)?;
        let mut truth = Vec::with_capacity(folds[f].len());
        let mut pred = Vec::with_capacity(folds[f].len());
        for &i in &folds[f] {
            truth.push(ys[i]);
            pred.push(model.predict(&project(&xs[i], features))?);
        }
        total += compute_metrics(&truth, &pred)?.f1;
    }
    Ok(total / folds.len() as f64)
}

fn width(xs: &[Vec<f64>], ys: &[Label]) -> Result<usize> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len().max(1),
            got: ys.len(),
        });
    }
    Ok(xs[0].len())
}

/// Sequential backward selection down to `d` features. Each round removes the
/// feature whose removal gives the best CV F1; ties remove the lowest index.
pub fn sbs<F>(fit: &F, xs: &[Vec<f64>], ys: &[Label], d: usize, cv_folds: usize, seed: u64) -> Result<FeatureSubset>
where
    F: Fn(&[Vec<f64>], &[Label]) -> Result<FittedClassifier> + Sync,
{
    let n = width(xs, ys)?;
    if d < 1 || d >= n {
        return Err(Error::InvalidConfig(format!("sbs target d={d} outside 1..{n}")));
    }
    let folds = kfold_split(ys, cv_folds, seed)?;
    let mut current: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(n - d);
    while current.len() > d {
        let scores: Vec<Result<f64>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..current.len())
                .map(|j| {
                    let mut cand = current.clone();
                    cand.remove(j);
                    let folds = &folds;
                    s.spawn(move || cv_f1(fit, xs, ys, &cand, folds))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sbs worker")).collect()
        });
        let mut best: Option<(usize, f64)> = None;
        for (j, score) in scores.into_iter().enumerate() {
            let score = score?;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        let (j, score) = best.expect("at least two features remain");
        let removed = current.remove(j);
        trace.push(SelectionStep {
            removed,
            remaining: current.len(),
            score,
        });
    }
    Ok(FeatureSubset {
        n_features: n,
        score: trace.last().map_or(f64::NAN, |s| s.score),
        selected: current,
        trace,
    })
}

/// Runs SBS to the smallest of `ds` and keeps whichever of the `ds` subset
/// sizes scored best; ties go to the smaller subset.
pub fn sbs_sweep<F>(fit: &F, xs: &[Vec<f64>], ys: &[Label], ds: &[usize], cv_folds: usize, seed: u64) -> Result<FeatureSubset>
where
    F: Fn(&[Vec<f64>], &[Label]) -> Result<FittedClassifier> + Sync,
{
    let Some(&d_min) = ds.iter().min() else {
        return Err(Error::Empty("sbs sweep sizes"));
    };
    let full = sbs(fit, xs, ys, d_min, cv_folds, seed)?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (round, step) in full.trace.iter().enumerate() {
        if ds.contains(&step.remaining) && step.score >= best.1 {
            best = (round + 1, step.score);
        }
    }
    Ok(FeatureSubset {
        selected: full.after(best.0),
        score: best.1,
        ..full
    })
}

/// Default SBS sweep sizes `{n/4, n/2, 3n/4}` (at least 1, deduplicated).
pub fn default_sweep(n: usize) -> Vec<usize> {
    let mut ds: Vec<usize> = [n / 4, n / 2, 3 * n / 4].into_iter().map(|d| d.max(1)).filter(|&d| d < n).collect();
    ds.dedup();
    ds
}

/// Recursive feature elimination: each round refits on all samples, drops the
/// lowest-importance feature (ties: lowest index) and scores the rest by CV F1.
/// Returns the best-scoring subset, preferring the smaller one on ties.
pub fn rfecv<F>(fit: &F, xs: &[Vec<f64>], ys: &[Label], cv_folds: usize, seed: u64) -> Result<FeatureSubset>
where
    F: Fn(&[Vec<f64>], &[Label]) -> Result<FittedClassifier>,
{
    let n = width(xs, ys)?;
    let folds = kfold_split(ys, cv_folds, seed)?;
    let mut current: Vec<usize> = (0..n).collect();
    let mut best = (current.clone(), cv_f1(fit, xs, ys, &current, &folds)?);
    let mut trace = Vec::new();
    while current.len() > 1 {
        let px: Vec<Vec<f64>> = xs.iter().map(|x| project(x, &current)).collect();
        let model = fit(&px, ys)?;
        let kind = model.kind().name();
        let importance = model.importance().ok_or(Error::NoImportance(kind))?;
        let (j, _) = importance
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
        let removed = current.remove(j);
        let score = cv_f1(fit, xs, ys, &current, &folds)?;
        trace.push(SelectionStep {
            removed,
            remaining: current.len(),
            score,
        });
        if score >= best.1 {
            best = (current.clone(), score);
        }
    }
    Ok(FeatureSubset {
        n_features: n,
        selected: best.0,
        score: best.1,
        trace,
    })
}
