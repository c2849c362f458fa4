use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{Activation, LayerSpec, NetworkSpec, KERNEL};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A network description plus its parameters: `weight, bias` for every dense or
/// conv layer, in layer order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    spec: NetworkSpec,
    params: Vec<Tensor>,
}

/// Per-layer activations recorded by [`Network::forward_trace`]; entry 0 is the input.
#[derive(Clone, Debug)]
pub struct Trace {
    activations: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace holds the input")
    }
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for layer in &spec.layers {
            let Some((w_shape, b_shape)) = layer.param_shapes() else {
                continue;
            };
            let (fan_in, fan_out) = match layer {
                LayerSpec::Dense { input, output, .. } => (*input, *output),
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    ..
                } => (in_channels * KERNEL * KERNEL, out_channels * KERNEL * KERNEL),
                _ => unreachable!("only parametric layers reach here"),
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let n = w_shape.iter().product();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
            params.push(Tensor::new(w_shape, w)?);
            params.push(Tensor::zeros(&b_shape));
        }
        Ok(Network { spec, params })
    }

    pub fn from_parts(spec: NetworkSpec, params: Vec<Tensor>) -> Result<Self> {
        spec.shapes()?;
        let expected: Vec<Vec<usize>> = spec
            .layers
            .iter()
            .filter_map(LayerSpec::param_shapes)
            .flat_map(|(w, b)| [w, b])
            .collect();
        if expected.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: expected.len(),
                got: params.len(),
            });
        }
        for (e, p) in expected.iter().zip(&params) {
            if e.as_slice() != p.shape() {
                return Err(Error::ShapeMismatch {
                    expected: e.clone(),
                    got: p.shape().to_vec(),
                });
            }
        }
        Ok(Network { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    /// `(name, tensor)` pairs: `"<layer>.weight"` / `"<layer>.bias"`.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        let mut p = self.params.iter();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            if layer.param_shapes().is_some() {
                out.push((format!("{i}.weight"), p.next().expect("weight")));
                out.push((format!("{i}.bias"), p.next().expect("bias")));
            }
        }
        out
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.spec.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input_shape.clone(),
                got: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut p = 0;
        for layer in &self.spec.layers {
            x = self.apply_layer(layer, &mut p, x)?;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Tensor) -> Result<Trace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.spec.layers.len() + 1);
        activations.push(input.clone());
        let mut p = 0;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let x = activations.last().expect("nonempty").clone();
            let y = self.apply_layer(layer, &mut p, x)?;
            if !y.all_finite() {
                return Err(Error::NonFinite {
                    layer: i,
                    detail: format!("{layer:?} produced a non-finite activation"),
                });
            }
            activations.push(y);
        }
        Ok(Trace { activations })
    }

    fn apply_layer(&self, layer: &LayerSpec, p: &mut usize, x: Tensor) -> Result<Tensor> {
        let out_shape = layer.output_shape(x.shape())?;
        match layer {
            LayerSpec::Dense { activation, .. } => {
                let (w, b) = (&self.params[*p], &self.params[*p + 1]);
                *p += 2;
                let mut y = dense_forward(w, b, x.data());
                y.iter_mut().for_each(|v| *v = activation.apply(*v));
                Tensor::new(out_shape, y)
            }
            LayerSpec::Conv2d { activation, .. } => {
                let (w, b) = (&self.params[*p], &self.params[*p + 1]);
                *p += 2;
                let mut y = conv_forward(w, b, &x);
                y.iter_mut().for_each(|v| *v = activation.apply(*v));
                Tensor::new(out_shape, y)
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => x.reshape(out_shape),
        }
    }

    /// Reverse pass: accumulates parameter gradients into `grads` and returns the
    /// gradient with respect to the network input.
    pub fn backward(&self, trace: &Trace, grad_output: &Tensor, grads: &mut [Tensor]) -> Tensor {
        let mut grad = grad_output.data().to_vec();
        let mut p = self.params.len();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let input = &trace.activations[i];
            let output = &trace.activations[i + 1];
            match layer {
                LayerSpec::Dense { activation, .. } | LayerSpec::Conv2d { activation, .. } => {
                    p -= 2;
                    apply_activation_grad(*activation, output.data(), &mut grad);
                    let w = &self.params[p];
                    let (gw, gb) = split_pair(grads, p);
                    grad = if matches!(layer, LayerSpec::Dense { .. }) {
                        dense_backward(w, input.data(), &grad, gw, gb)
                    } else {
                        conv_backward(w, input, &grad, gw, gb)
                    };
                }
                LayerSpec::Flatten | LayerSpec::Reshape { .. } => {}
            }
        }
        Tensor::new(self.spec.input_shape.clone(), grad).expect("input shape holds gradient")
    }
}

fn split_pair(grads: &mut [Tensor], p: usize) -> (&mut Tensor, &mut Tensor) {
    let (a, b) = grads[p..].split_at_mut(1);
    (&mut a[0], &mut b[0])
}

fn apply_activation_grad(act: Activation, output: &[f64], grad: &mut [f64]) {
    if act == Activation::Identity {
        return;
    }
    for (g, &a) in grad.iter_mut().zip(output) {
        *g *= act.derivative_from_output(a);
    }
}

fn dense_forward(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    w.data()
        .chunks_exact(n_in)
        .zip(b.data())
        .map(|(row, &bias)| bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn dense_backward(w: &Tensor, x: &[f64], delta: &[f64], gw: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
    let n_in = x.len();
    let mut dx = vec![0.0; n_in];
    for (o, &d) in delta.iter().enumerate() {
        gb.data_mut()[o] += d;
        if d == 0.0 {
            continue;
        }
        let row = &w.data()[o * n_in..(o + 1) * n_in];
        let grow = &mut gw.data_mut()[o * n_in..(o + 1) * n_in];
        for ((g, dxi), (&wi, &xi)) in grow.iter_mut().zip(dx.iter_mut()).zip(row.iter().zip(x)) {
            *g += d * xi;
            *dxi += d * wi;
        }
    }
    dx
}

/// Column range `x` such that `x + kx - 1` stays inside `[0, width)`.
fn valid_cols(kx: usize, width: usize) -> std::ops::Range<usize> {
    let lo = 1usize.saturating_sub(kx);
    let hi = (width + 1).saturating_sub(kx).min(width);
    lo..hi
}

fn conv_forward(w: &Tensor, b: &Tensor, x: &Tensor) -> Vec<f64> {
    let [ic, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let oc = w.shape()[0];
    let plane = h * wd;
    let xd = x.data();
    let wt = w.data();
    let mut out = vec![0.0; oc * plane];
    for o in 0..oc {
        let out_plane = &mut out[o * plane..(o + 1) * plane];
        out_plane.iter_mut().for_each(|v| *v = b.data()[o]);
        for c in 0..ic {
            let in_plane = &xd[c * plane..(c + 1) * plane];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let k = wt[((o * ic + c) * KERNEL + ky) * KERNEL + kx];
                    let cols = valid_cols(kx, wd);
                    for y in 0..h {
                        let iy = y + ky;
                        if iy == 0 || iy > h {
                            continue;
                        }
                        let in_row = &in_plane[(iy - 1) * wd..iy * wd];
                        let out_row = &mut out_plane[y * wd..(y + 1) * wd];
                        for xcol in cols.clone() {
                            out_row[xcol] += k * in_row[xcol + kx - 1];
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward(w: &Tensor, x: &Tensor, delta: &[f64], gw: &mut Tensor, gb: &mut Tensor) -> Vec<f64> {
    let [ic, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let oc = w.shape()[0];
    let plane = h * wd;
    let xd = x.data();
    let wt = w.data();
    let mut dx = vec![0.0; ic * plane];
    for o in 0..oc {
        let d_plane = &delta[o * plane..(o + 1) * plane];
        gb.data_mut()[o] += d_plane.iter().sum::<f64>();
        for c in 0..ic {
            let in_plane = &xd[c * plane..(c + 1) * plane];
            let dx_plane = &mut dx[c * plane..(c + 1) * plane];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let idx = ((o * ic + c) * KERNEL + ky) * KERNEL + kx;
                    let k = wt[idx];
                    let cols = valid_cols(kx, wd);
                    let mut acc = 0.0;
                    for y in 0..h {
                        let iy = y + ky;
                        if iy == 0 || iy > h {
                            continue;
                        }
                        let base = (iy - 1) * wd;
                        let d_row = &d_plane[y * wd..(y + 1) * wd];
                        for xcol in cols.clone() {
                            let ix = base + xcol + kx - 1;
                            acc += d_row[xcol] * in_plane[ix];
                            dx_plane[ix] += k * d_row[xcol];
                        }
                    }
                    gw.data_mut()[idx] += acc;
                }
            }
        }
    }
    dx
}
