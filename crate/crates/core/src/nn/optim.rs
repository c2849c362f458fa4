use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    BinaryCrossEntropy,
}

const BCE_CLAMP: f64 = 1e-12;

impl Loss {
    /// Per-sample loss, averaged over output elements.
    pub fn value(self, output: &[f64], target: &[f64]) -> f64 {
        let n = output.len() as f64;
        match self {
            Loss::Mse => output.iter().zip(target).map(|(y, t)| (y - t).powi(2)).sum::<f64>() / n,
            Loss::BinaryCrossEntropy => {
                output
                    .iter()
                    .zip(target)
                    .map(|(&y, &t)| {
                        let y = y.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                        -(t * y.ln() + (1.0 - t) * (1.0 - y).ln())
                    })
                    .sum::<f64>()
                    / n
            }
        }
    }

    pub fn gradient(self, output: &[f64], target: &[f64]) -> Vec<f64> {
        let n = output.len() as f64;
        match self {
            Loss::Mse => output.iter().zip(target).map(|(y, t)| 2.0 * (y - t) / n).collect(),
            Loss::BinaryCrossEntropy => output
                .iter()
                .zip(target)
                .map(|(&y, &t)| {
                    let y = y.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    (y - t) / (y * (1.0 - y)) / n
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => lr,
        }
    }
}

/// Optimizer moments for one parameter list.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    optimizer: Optimizer,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect();
        OptimizerState {
            optimizer,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        match self.optimizer {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.add_scaled(g, -lr);
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                        v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                        *w -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + epsilon);
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub loss: Loss,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::adam(0.01),
            loss: Loss::Mse,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            max_steps: Some(5000),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.optimizer.lr() > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.max_steps == Some(0) {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean loss over `inputs` and the gradient of that mean with respect to every
/// parameter.
pub fn gradients(
    net: &Network,
    inputs: &[&Tensor],
    targets: &[&Tensor],
    loss: Loss,
) -> Result<(f64, Vec<Tensor>)> {
    if inputs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    let mut grads = net.zero_grads();
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let trace = net.forward_trace(x)?;
        let out = trace.output();
        if out.shape() != t.shape() {
            return Err(Error::ShapeMismatch {
                expected: out.shape().to_vec(),
                got: t.shape().to_vec(),
            });
        }
        total += loss.value(out.data(), t.data());
        let g = Tensor::new(out.shape().to_vec(), loss.gradient(out.data(), t.data()))?;
        net.backward(&trace, &g, &mut grads);
    }
    let scale = 1.0 / inputs.len() as f64;
    grads.iter_mut().for_each(|g| g.scale(scale));
    Ok((total * scale, grads))
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub network: Network,
    /// Mean per-sample training loss of each epoch.
    pub loss_curve: Vec<f64>,
}

/// Mini-batch training, deterministic in `config.seed`.
pub fn train(mut net: Network, inputs: &[Tensor], targets: &[Tensor], config: &TrainConfig) -> Result<Trained> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimizerState::new(config.optimizer, net.params());
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    'epochs: for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|m| step >= m) {
                if seen > 0 {
                    loss_curve.push(epoch_loss / seen as f64);
                }
                break 'epochs;
            }
            let xs: Vec<&Tensor> = batch.iter().map(|&i| &inputs[i]).collect();
            let ts: Vec<&Tensor> = batch.iter().map(|&i| &targets[i]).collect();
            let (loss, grads) = gradients(&net, &xs, &ts, config.loss).map_err(|e| Error::Diverged {
                epoch,
                step,
                detail: e.to_string(),
            })?;
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    detail: format!("loss {loss}, last finite epoch loss {:?}", loss_curve.last()),
                });
            }
            state.step(net.params_mut(), &grads);
            epoch_loss += loss * batch.len() as f64;
            seen += batch.len();
            step += 1;
        }
        loss_curve.push(epoch_loss / seen as f64);
    }
    Ok(Trained {
        network: net,
        loss_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec, NetworkSpec};

    fn scalar_model(w: f64) -> Network {
        let spec = NetworkSpec::new(vec![1], vec![LayerSpec::dense(1, 1, Activation::Identity)]).unwrap();
        Network::from_parts(spec, vec![Tensor::new(vec![1, 1], vec![w]).unwrap(), Tensor::zeros(&[1])]).unwrap()
    }

    #[test]
    fn scalar_mse_gradient_closed_form() {
        let w = 0.7;
        let net = scalar_model(w);
        let xs: Vec<Tensor> = [1.0, -2.0, 0.5].iter().map(|&x| Tensor::vector(vec![x])).collect();
        let ts: Vec<Tensor> = [2.0, 1.0, 0.0].iter().map(|&t| Tensor::vector(vec![t])).collect();
        let (_, g) = gradients(&net, &xs.iter().collect::<Vec<_>>(), &ts.iter().collect::<Vec<_>>(), Loss::Mse).unwrap();
        // d/dw mean (wx - t)² = 2 mean(x (wx - t))
        let expected = 2.0 * [(1.0, 2.0), (-2.0, 1.0), (0.5, 0.0)]
            .iter()
            .map(|&(x, t)| x * (w * x - t))
            .sum::<f64>()
            / 3.0;
        assert!((g[0].data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let net = scalar_model(1.5);
        let x = Tensor::vector(vec![2.0]);
        let t = Tensor::vector(vec![3.0]);
        let (l, g) = gradients(&net, &[&x], &[&t], Loss::Mse).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { optimizer: Optimizer::Sgd { lr: 0.0 }, ..Default::default() }.validate().is_err());
        let net = scalar_model(1.0);
        assert!(matches!(train(net, &[], &[], &TrainConfig::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn one_epoch_one_loss_entry_and_determinism() {
        let xs: Vec<Tensor> = (0..10).map(|i| Tensor::vector(vec![i as f64 / 10.0])).collect();
        let ts: Vec<Tensor> = xs.iter().map(|x| Tensor::vector(vec![3.0 * x.data()[0] + 1.0])).collect();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..Default::default()
        };
        let a = train(scalar_model(0.0), &xs, &ts, &cfg).unwrap();
        assert_eq!(a.loss_curve.len(), 1);
        let cfg = TrainConfig { epochs: 20, ..cfg };
        let a = train(scalar_model(0.0), &xs, &ts, &cfg).unwrap();
        let b = train(scalar_model(0.0), &xs, &ts, &cfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn full_batch_sgd_on_convex_problem_is_monotone() {
        let xs: Vec<Tensor> = (0..16).map(|i| Tensor::vector(vec![(i as f64 - 8.0) / 4.0])).collect();
        let ts: Vec<Tensor> = xs.iter().map(|x| Tensor::vector(vec![-2.0 * x.data()[0] + 0.5])).collect();
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd { lr: 0.05 },
            epochs: 100,
            batch_size: 16,
            max_steps: None,
            ..Default::default()
        };
        let out = train(scalar_model(0.3), &xs, &ts, &cfg).unwrap();
        assert!(out.loss_curve.windows(2).all(|w| w[1] <= w[0]));
        assert!(*out.loss_curve.last().unwrap() < 1e-3);
    }

    #[test]
    fn divergence_is_reported() {
        let xs: Vec<Tensor> = (0..4).map(|i| Tensor::vector(vec![i as f64 * 100.0])).collect();
        let ts = xs.clone();
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd { lr: 10.0 },
            epochs: 200,
            batch_size: 4,
            max_steps: None,
            ..Default::default()
        };
        assert!(matches!(train(scalar_model(0.0), &xs, &ts, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn max_steps_caps_training() {
        let xs: Vec<Tensor> = (0..10).map(|i| Tensor::vector(vec![i as f64])).collect();
        let cfg = TrainConfig {
            epochs: 100,
            batch_size: 5,
            max_steps: Some(5),
            ..Default::default()
        };
        let out = train(scalar_model(0.0), &xs, &xs, &cfg).unwrap();
        assert_eq!(out.loss_curve.len(), 3);
    }
}
