use serde::{Deserialize, Serialize};

use super::check_training;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::nn::sigmoid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight_decay: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            learning_rate: 0.5,
            iterations: 500,
            weight_decay: 1e-4,
        }
    }
}

/// Logistic regression on standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// Set when the training labels contained a single class.
    pub single_class: Option<Label>,
}

/// Full-batch gradient descent on mean cross-entropy plus `weight_decay/2 · ‖w‖²`.
///
/// Features are standardized with the training mean and standard deviation
/// (scale 1 for constant features) before fitting.
pub fn fit_lr(xs: &[Vec<f64>], ys: &[Label], cfg: &LrConfig) -> Result<LrModel> {
    let dim = check_training(xs, ys)?;
    if xs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            layer: 0,
            detail: "logistic regression features".into(),
        });
    }
    if !(cfg.learning_rate > 0.0) || cfg.weight_decay < 0.0 {
        return Err(Error::InvalidConfig("lr needs a positive rate and non-negative decay".into()));
    }
    let n = xs.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in xs {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n);
    }
    let mut scale = vec![0.0; dim];
    for x in xs {
        for ((s, v), m) in scale.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    scale.iter_mut().for_each(|s| *s = if *s > 0.0 { s.sqrt() } else { 1.0 });
    let zs: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| x.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let targets: Vec<f64> = ys.iter().map(|y| y.index() as f64).collect();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut gw = vec![0.0; dim];
    for _ in 0..cfg.iterations {
        gw.iter_mut().zip(&w).for_each(|(g, wi)| *g = cfg.weight_decay * wi);
        let mut gb = 0.0;
        for (z, t) in zs.iter().zip(&targets) {
            let p = sigmoid(dot(&w, z) + b);
            let r = (p - t) / n;
            gw.iter_mut().zip(z).for_each(|(g, zi)| *g += r * zi);
            gb += r;
        }
        w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= cfg.learning_rate * g);
        b -= cfg.learning_rate * gb;
    }
    let single_class = if targets.iter().all(|&t| t == targets[0]) {
        Some(ys[0])
    } else {
        None
    };
    Ok(LrModel {
        weights: w,
        bias: b,
        feature_mean: mean,
        feature_scale: scale,
        single_class,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LrModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let z: f64 = x
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .zip(&self.weights)
            .map(|(((v, m), s), w)| w * (v - m) / s)
            .sum();
        Ok(sigmoid(z + self.bias))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.probability(x)? > 0.5 { Label::Uti } else { Label::NonUti })
    }

    /// `|w|` on the standardized scale.
    pub fn importance(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.abs()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_four_points() {
        let xs = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![3.0, 0.0], vec![3.0, 1.0]];
        let ys = vec![Label::NonUti, Label::NonUti, Label::Uti, Label::Uti];
        let m = fit_lr(&xs, &ys, &LrConfig::default()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(m.predict(x).unwrap(), *y);
        }
        assert!(m.importance()[0] > m.importance()[1]);
        assert_eq!(m.single_class, None);
    }

    #[test]
    fn single_class_is_flagged() {
        let m = fit_lr(&[vec![1.0], vec![2.0]], &[Label::Uti, Label::Uti], &LrConfig::default()).unwrap();
        assert_eq!(m.single_class, Some(Label::Uti));
        assert_eq!(m.predict(&[1.5]).unwrap(), Label::Uti);
    }

    #[test]
    fn constant_feature_is_harmless() {
        let xs = vec![vec![5.0, 0.0], vec![5.0, 1.0]];
        let m = fit_lr(&xs, &[Label::NonUti, Label::Uti], &LrConfig::default()).unwrap();
        assert!(m.weights.iter().all(|w| w.is_finite()));
        assert_eq!(m.weights[0], 0.0);
    }
}
