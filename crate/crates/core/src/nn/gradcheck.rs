//! Central finite-difference checks of the reverse pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::network::Network;
use super::optim::{gradients, Loss};
use super::spec::{Activation, LayerSpec, NetworkSpec};
use super::tensor::Tensor;
use crate::error::Result;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error of near-zero gradients.
const REL_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, Serialize)]
pub struct Probe {
    pub case: String,
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub probes: Vec<Probe>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.probes.iter().all(|p| p.rel_error <= self.tolerance)
    }

    pub fn worst(&self) -> Option<&Probe> {
        self.probes
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Probe> {
        self.probes.iter().filter(|p| p.rel_error > self.tolerance)
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

fn mean_loss(net: &Network, inputs: &[&Tensor], targets: &[&Tensor], loss: Loss) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        total += loss.value(net.forward(x)?.data(), t.data());
    }
    Ok(total / inputs.len() as f64)
}

/// Compares `probes` randomly chosen parameter gradients with central differences
/// of the mean loss. Uses only the forward pass for the numeric side.
pub fn check_network(
    case: &str,
    net: &Network,
    inputs: &[&Tensor],
    targets: &[&Tensor],
    loss: Loss,
    probes: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Probe>> {
    let (_, analytic) = gradients(net, inputs, targets, loss)?;
    let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
    let mut work = net.clone();
    let mut out = Vec::with_capacity(probes);
    for _ in 0..probes {
        let p = rng.random_range(0..work.params().len());
        let i = rng.random_range(0..work.params()[p].len());
        let orig = work.params()[p].data()[i];
        work.params_mut()[p].data_mut()[i] = orig + STEP;
        let up = mean_loss(&work, inputs, targets, loss)?;
        work.params_mut()[p].data_mut()[i] = orig - STEP;
        let down = mean_loss(&work, inputs, targets, loss)?;
        work.params_mut()[p].data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[p].data()[i];
        out.push(Probe {
            case: case.to_string(),
            param: names[p].clone(),
            index: i,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    Ok(out)
}

/// One small network per layer type and activation.
pub fn standard_cases() -> Vec<(String, NetworkSpec, Loss)> {
    let mut cases = Vec::new();
    for act in Activation::ALL {
        cases.push((
            format!("dense/{act:?}"),
            NetworkSpec::new(
                vec![5],
                vec![LayerSpec::dense(5, 4, act), LayerSpec::dense(4, 3, Activation::Identity)],
            )
            .expect("valid"),
            Loss::Mse,
        ));
        cases.push((
            format!("conv2d/{act:?}"),
            NetworkSpec::new(
                vec![2, 5, 4],
                vec![
                    LayerSpec::conv(2, 3, act),
                    LayerSpec::Flatten,
                    LayerSpec::dense(60, 2, Activation::Identity),
                ],
            )
            .expect("valid"),
            Loss::Mse,
        ));
    }
    cases.push((
        "reshape-conv-dense/bce".into(),
        NetworkSpec::new(
            vec![12],
            vec![
                LayerSpec::Reshape { shape: vec![1, 4, 3] },
                LayerSpec::conv(1, 2, Activation::Tanh),
                LayerSpec::Flatten,
                LayerSpec::dense(24, 1, Activation::Sigmoid),
            ],
        )
        .expect("valid"),
        Loss::BinaryCrossEntropy,
    ));
    cases.push((
        "conv-conv-autoencoder/mse".into(),
        NetworkSpec::new(
            vec![1, 6, 4],
            vec![
                LayerSpec::conv(1, 3, Activation::Relu),
                LayerSpec::conv(3, 2, Activation::Sigmoid),
                LayerSpec::conv(2, 1, Activation::Identity),
            ],
        )
        .expect("valid"),
        Loss::Mse,
    ));
    cases
}

/// Runs every standard case with parameters from N(0, 0.1) and inputs from N(0, 1).
pub fn run_suite(probes_per_case: usize, seed: u64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let param_dist = Normal::new(0.0, 0.1).expect("sigma");
    let input_dist = Normal::new(0.0, 1.0).expect("sigma");
    let mut probes = Vec::new();
    for (name, spec, loss) in standard_cases() {
        let mut net = Network::init(spec.clone(), rng.random())?;
        for p in net.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = param_dist.sample(&mut rng));
        }
        let out_shape = spec.output_shape()?;
        let in_len: usize = spec.input_shape.iter().product();
        let out_len: usize = out_shape.iter().product();
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..3 {
            let x: Vec<f64> = (0..in_len).map(|_| input_dist.sample(&mut rng)).collect();
            let t: Vec<f64> = (0..out_len)
                .map(|_| match loss {
                    Loss::Mse => input_dist.sample(&mut rng),
                    Loss::BinaryCrossEntropy => rng.random_range(0.05..0.95),
                })
                .collect();
            inputs.push(Tensor::new(spec.input_shape.clone(), x)?);
            targets.push(Tensor::new(out_shape.clone(), t)?);
        }
        let xs: Vec<&Tensor> = inputs.iter().collect();
        let ts: Vec<&Tensor> = targets.iter().collect();
        probes.extend(check_network(&name, &net, &xs, &ts, loss, probes_per_case, &mut rng)?);
    }
    Ok(GradcheckReport {
        probes,
        tolerance: TOLERANCE,
    })
}
