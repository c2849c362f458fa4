//! Bernoulli restricted Boltzmann machine trained with one-step contrastive divergence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for RbmConfig {
    fn default() -> Self {
        RbmConfig {
            hidden_dim: 64,
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Weights are stored visible-major: `weights[v * hidden + h]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbmModel {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// Per-feature corpus maxima; visible units are `clamp(x / scale, 0, 1)`.
    pub visible_scale: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RbmTraining {
    pub model: RbmModel,
    /// Mean free energy of the training set after each epoch.
    pub free_energy: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl RbmModel {
    pub fn visible(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.visible_scale)
            .map(|(&v, &s)| (v / s).clamp(0.0, 1.0))
            .collect()
    }

    fn hidden_pre(&self, v: &[f64]) -> Vec<f64> {
        let mut pre = self.hidden_bias.clone();
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden];
            for (p, &w) in pre.iter_mut().zip(row) {
                *p += vi * w;
            }
        }
        pre
    }

    pub fn hidden_probs(&self, v: &[f64]) -> Vec<f64> {
        self.hidden_pre(v).into_iter().map(sigmoid).collect()
    }

    pub fn visible_probs(&self, h: &[f64]) -> Vec<f64> {
        (0..self.n_visible)
            .map(|i| {
                let row = &self.weights[i * self.n_hidden..(i + 1) * self.n_hidden];
                sigmoid(self.visible_bias[i] + row.iter().zip(h).map(|(w, hj)| w * hj).sum::<f64>())
            })
            .collect()
    }

    /// F(v) = −bᵀv − Σⱼ softplus(cⱼ + vᵀWⱼ)
    pub fn free_energy(&self, v: &[f64]) -> f64 {
        let linear: f64 = self.visible_bias.iter().zip(v).map(|(b, x)| b * x).sum();
        -linear - self.hidden_pre(v).into_iter().map(softplus).sum::<f64>()
    }

    /// Latent features: hidden activation probabilities.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_visible {
            return Err(Error::DimensionMismatch {
                expected: self.n_visible,
                got: x.len(),
            });
        }
        Ok(self.hidden_probs(&self.visible(x)))
    }
}

pub fn train_rbm(data: &[Vec<f64>], config: &RbmConfig) -> Result<RbmTraining> {
    let first = data.first().ok_or(Error::Empty("unlabelled corpus"))?;
    if config.hidden_dim == 0 || config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidConfig(
            "rbm hidden_dim, epochs and batch_size must be positive".into(),
        ));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("rbm learning rate must be positive".into()));
    }
    let n_visible = first.len();
    if let Some(bad) = data.iter().find(|x| x.len() != n_visible) {
        return Err(Error::DimensionMismatch {
            expected: n_visible,
            got: bad.len(),
        });
    }
    let n_hidden = config.hidden_dim;
    let mut visible_scale = vec![0.0f64; n_visible];
    for x in data {
        for (s, &v) in visible_scale.iter_mut().zip(x) {
            *s = s.max(v);
        }
    }
    visible_scale.iter_mut().for_each(|s| *s = s.max(1e-8));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = RbmModel {
        n_visible,
        n_hidden,
        weights: (0..n_visible * n_hidden)
            .map(|_| rng.random_range(-0.01..0.01))
            .collect(),
        visible_bias: vec![0.0; n_visible],
        hidden_bias: vec![0.0; n_hidden],
        visible_scale,
    };
    let visible: Vec<Vec<f64>> = data.iter().map(|x| model.visible(x)).collect();
    let mut order: Vec<usize> = (0..visible.len()).collect();
    let mut free_energy = Vec::with_capacity(config.epochs);
    let lr = config.learning_rate;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut dw = vec![0.0; n_visible * n_hidden];
            let mut db = vec![0.0; n_visible];
            let mut dc = vec![0.0; n_hidden];
            for &i in batch {
                let v0 = &visible[i];
                let h0 = model.hidden_probs(v0);
                let h_sample: Vec<f64> = h0
                    .iter()
                    .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                    .collect();
                let v1 = model.visible_probs(&h_sample);
                let h1 = model.hidden_probs(&v1);
                for a in 0..n_visible {
                    let row = &mut dw[a * n_hidden..(a + 1) * n_hidden];
                    for (j, d) in row.iter_mut().enumerate() {
                        *d += v0[a] * h0[j] - v1[a] * h1[j];
                    }
                    db[a] += v0[a] - v1[a];
                }
                for j in 0..n_hidden {
                    dc[j] += h0[j] - h1[j];
                }
            }
            let scale = lr / batch.len() as f64;
            for (w, d) in model.weights.iter_mut().zip(&dw) {
                *w += scale * d;
            }
            for (b, d) in model.visible_bias.iter_mut().zip(&db) {
                *b += scale * d;
            }
            for (c, d) in model.hidden_bias.iter_mut().zip(&dc) {
                *c += scale * d;
            }
        }
        let fe = visible.iter().map(|v| model.free_energy(v)).sum::<f64>() / visible.len() as f64;
        if !fe.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: 0,
                detail: "rbm free energy is not finite".into(),
            });
        }
        free_energy.push(fe);
    }
    Ok(RbmTraining { model, free_energy })
}
