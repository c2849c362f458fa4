use serde::{Deserialize, Serialize};

use super::check_training;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::nn::sigmoid;

pub const SIGMA_FLOOR: f64 = 1e-6;

/// Gaussian naive Bayes; index 0 is [`Label::NonUti`], 1 is [`Label::Uti`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub stds: [Vec<f64>; 2],
    pub sigma_floor: f64,
}

/// Maximum-likelihood fit: class-frequency priors, per-class mean and population
/// standard deviation floored at [`SIGMA_FLOOR`].
pub fn fit_gnb(xs: &[Vec<f64>], ys: &[Label]) -> Result<GnbModel> {
    let dim = check_training(xs, ys)?;
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    for (x, y) in xs.iter().zip(ys) {
        let c = y.index();
        counts[c] += 1;
        sums[c].iter_mut().zip(x).for_each(|(s, v)| *s += v);
    }
    if counts[0] == 0 {
        return Err(Error::MissingClass("non_uti"));
    }
    if counts[1] == 0 {
        return Err(Error::MissingClass("uti"));
    }
    let means = [0, 1].map(|c| sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<_>>());
    let mut sq = [vec![0.0; dim], vec![0.0; dim]];
    for (x, y) in xs.iter().zip(ys) {
        let c = y.index();
        for ((s, v), m) in sq[c].iter_mut().zip(x).zip(&means[c]) {
            *s += (v - m) * (v - m);
        }
    }
    let stds = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| (s / counts[c] as f64).sqrt().max(SIGMA_FLOOR))
            .collect::<Vec<_>>()
    });
    let n = xs.len() as f64;
    Ok(GnbModel {
        priors: [counts[0] as f64 / n, counts[1] as f64 / n],
        means,
        stds,
        sigma_floor: SIGMA_FLOOR,
    })
}

impl GnbModel {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Unnormalized log joint `log P(y) + Σ log N(xᵢ; μ, σ)` per class.
    pub fn log_joint(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        Ok([0, 1].map(|c| {
            let mut lp = self.priors[c].ln();
            for ((v, m), s) in x.iter().zip(&self.means[c]).zip(&self.stds[c]) {
                let z = (v - m) / s;
                lp -= 0.5 * z * z + s.ln() + half_log_2pi;
            }
            lp
        }))
    }

    /// Predicted class and normalized posterior; ties go to [`Label::NonUti`].
    pub fn predict(&self, x: &[f64]) -> Result<(Label, [f64; 2])> {
        let lj = self.log_joint(x)?;
        let post = [sigmoid(lj[0] - lj[1]), sigmoid(lj[1] - lj[0])];
        let label = if lj[1] > lj[0] { Label::Uti } else { Label::NonUti };
        Ok((label, post))
    }

    /// Per-feature class-mean separation `|μ₀ − μ₁| / mean(σ₀, σ₁)`.
    pub fn importance(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let spread = 0.5 * (self.stds[0][i] + self.stds[1][i]);
                (self.means[0][i] - self.means[1][i]).abs() / spread
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[usize]) -> Vec<Label> {
        v.iter().map(|&i| Label::from_index(i)).collect()
    }

    #[test]
    fn hand_ml_estimate() {
        let m = fit_gnb(&[vec![0.0], vec![2.0], vec![5.0]], &labels(&[0, 0, 1])).unwrap();
        assert_eq!(m.means[0], vec![1.0]);
        assert_eq!(m.stds[0], vec![1.0]);
        assert_eq!(m.stds[1], vec![SIGMA_FLOOR]);
    }

    #[test]
    fn balanced_priors() {
        let m = fit_gnb(&[vec![0.0], vec![1.0]], &labels(&[1, 0])).unwrap();
        assert_eq!(m.priors, [0.5, 0.5]);
    }

    #[test]
    fn symmetric_classes_at_origin() {
        let m = GnbModel {
            priors: [0.5, 0.5],
            means: [vec![-1.0], vec![1.0]],
            stds: [vec![1.0], vec![1.0]],
            sigma_floor: SIGMA_FLOOR,
        };
        let (label, post) = m.predict(&[0.0]).unwrap();
        assert_eq!(post, [0.5, 0.5]);
        assert_eq!(label, Label::NonUti);
    }

    #[test]
    fn prior_passes_through_identical_likelihoods() {
        let m = GnbModel {
            priors: [0.9, 0.1],
            means: [vec![0.0], vec![0.0]],
            stds: [vec![1.0], vec![1.0]],
            sigma_floor: SIGMA_FLOOR,
        };
        let (_, post) = m.predict(&[3.0]).unwrap();
        assert!((post[0] - 0.9).abs() < 1e-12 && (post[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wide_inputs_do_not_underflow() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.1; 7296]).collect();
        let m = fit_gnb(&xs, &labels(&[0, 0, 0, 1, 1, 1])).unwrap();
        let (label, post) = m.predict(&vec![0.45; 7296]).unwrap();
        assert!(post.iter().all(|p| p.is_finite()));
        assert_eq!(label, Label::Uti);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_gnb(&[vec![1.0]], &labels(&[1])),
            Err(Error::MissingClass("non_uti"))
        ));
        let m = fit_gnb(&[vec![1.0], vec![2.0]], &labels(&[0, 1])).unwrap();
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }
}
