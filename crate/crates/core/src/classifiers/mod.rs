//! Supervised heads over raw window features or extractor latents.
//!
//! Every head reports a UTI probability in [0, 1] and a hard label; class
//! index 0 is NonUTI, 1 is UTI, and ties always resolve to NonUTI.

mod gnb;
mod joint;
mod knn;
mod lr;
mod pnn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gnb::{fit_gnb, GnbModel, SIGMA_FLOOR};
pub use joint::{init_pnn, pnn_input, train_joint, JointSample, JointSchedule, JointTraining};
pub use knn::{fit_knn, KnnModel, DEFAULT_K};
pub use lr::{fit_lr, LrConfig, LrModel};
pub use pnn::{pnn_phi, pnn_probability, PnnKernel, PnnModel, DEFAULT_SIGMA};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Gnb,
    Lr,
    Knn,
    Pnn,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Gnb => "gnb",
            ClassifierKind::Lr => "lr",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Pnn => "pnn",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnb" => Ok(ClassifierKind::Gnb),
            "lr" => Ok(ClassifierKind::Lr),
            "knn" => Ok(ClassifierKind::Knn),
            "pnn" => Ok(ClassifierKind::Pnn),
            other => Err(Error::InvalidConfig(format!("unknown classifier `{other}`"))),
        }
    }
}

/// Hyper-parameters for fitting any head on a fixed feature matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub knn_k: usize,
    pub lr: LrConfig,
    /// Bandwidth for a PNN fitted without joint training.
    pub pnn_sigma: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Gnb,
            knn_k: DEFAULT_K,
            lr: LrConfig::default(),
            pnn_sigma: DEFAULT_SIGMA,
        }
    }
}

impl ClassifierConfig {
    pub fn of(kind: ClassifierKind) -> Self {
        ClassifierConfig {
            kind,
            ..Default::default()
        }
    }

    /// Fits the head; KNN's k is capped at the training size.
    pub fn fit(&self, xs: &[Vec<f64>], ys: &[Label]) -> Result<FittedClassifier> {
        Ok(match self.kind {
            ClassifierKind::Gnb => FittedClassifier::Gnb(fit_gnb(xs, ys)?),
            ClassifierKind::Lr => FittedClassifier::Lr(fit_lr(xs, ys, &self.lr)?),
            ClassifierKind::Knn => FittedClassifier::Knn(fit_knn(xs, ys, self.knn_k.min(xs.len()))?),
            ClassifierKind::Pnn => FittedClassifier::Pnn(PnnModel::from_samples(xs, ys, self.pnn_sigma)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedClassifier {
    Gnb(GnbModel),
    Lr(LrModel),
    Knn(KnnModel),
    Pnn(PnnModel),
}

impl FittedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            FittedClassifier::Gnb(_) => ClassifierKind::Gnb,
            FittedClassifier::Lr(_) => ClassifierKind::Lr,
            FittedClassifier::Knn(_) => ClassifierKind::Knn,
            FittedClassifier::Pnn(_) => ClassifierKind::Pnn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FittedClassifier::Gnb(m) => m.dim(),
            FittedClassifier::Lr(m) => m.dim(),
            FittedClassifier::Knn(m) => m.dim(),
            FittedClassifier::Pnn(m) => m.dim(),
        }
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedClassifier::Gnb(m) => Ok(m.predict(x)?.1[1]),
            FittedClassifier::Lr(m) => m.probability(x),
            FittedClassifier::Knn(m) => m.probability(x),
            FittedClassifier::Pnn(m) => m.probability(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        match self {
            FittedClassifier::Gnb(m) => Ok(m.predict(x)?.0),
            FittedClassifier::Lr(m) => m.predict(x),
            FittedClassifier::Knn(m) => m.predict(x),
            FittedClassifier::Pnn(m) => m.predict(x),
        }
    }

    /// Per-feature importance, where the head defines one (GNB, LR).
    pub fn importance(&self) -> Option<Vec<f64>> {
        match self {
            FittedClassifier::Gnb(m) => Some(m.importance()),
            FittedClassifier::Lr(m) => Some(m.importance()),
            FittedClassifier::Knn(_) | FittedClassifier::Pnn(_) => None,
        }
    }
}

pub(crate) fn check_training(xs: &[Vec<f64>], ys: &[Label]) -> Result<usize> {
    if xs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let dim = xs[0].len();
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(dim)
}

/// `log Σ exp(vᵢ)`; `−∞` for an empty or all-`−∞` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn fitted_dispatch() {
        let xs = vec![vec![0.0, 1.0], vec![0.2, 0.9], vec![3.0, -1.0], vec![3.1, -0.8]];
        let ys = vec![Label::NonUti, Label::NonUti, Label::Uti, Label::Uti];
        for kind in [ClassifierKind::Gnb, ClassifierKind::Lr, ClassifierKind::Knn, ClassifierKind::Pnn] {
            let m = ClassifierConfig::of(kind).fit(&xs, &ys).unwrap();
            assert_eq!(m.kind(), kind);
            for (x, y) in xs.iter().zip(&ys) {
                assert_eq!(m.predict(x).unwrap(), *y, "{kind}");
                let p = m.probability(x).unwrap();
                assert!((0.0..=1.0).contains(&p));
            }
            assert_eq!(m.importance().is_some(), matches!(kind, ClassifierKind::Gnb | ClassifierKind::Lr));
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<FittedClassifier>(&json).unwrap(), m);
        }
    }
}
