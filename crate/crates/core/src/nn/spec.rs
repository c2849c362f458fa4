use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Identity,
    ];

    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A layer descriptor. Convolutions are 3×3, stride 1, zero "same" padding, over
/// `[channels, height, width]` tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        activation: Activation,
    },
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
}

pub const KERNEL: usize = 3;

impl LayerSpec {
    pub fn dense(input: usize, output: usize, activation: Activation) -> Self {
        LayerSpec::Dense {
            input,
            output,
            activation,
        }
    }

    pub fn conv(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            activation,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::ShapeMismatch {
            expected,
            got: input.to_vec(),
        };
        match self {
            LayerSpec::Dense { input: i, output, .. } => {
                if input != [*i] {
                    return Err(mismatch(vec![*i]));
                }
                Ok(vec![*output])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                ..
            } => match input {
                [c, h, w] if c == in_channels => Ok(vec![*out_channels, *h, *w]),
                [_, h, w] => Err(mismatch(vec![*in_channels, *h, *w])),
                _ => Err(mismatch(vec![*in_channels, 0, 0])),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(mismatch(shape.clone()));
                }
                Ok(shape.clone())
            }
        }
    }

    /// Shapes of (weight, bias) for parametric layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { input, output, .. } => Some((vec![output, input], vec![output])),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                ..
            } => Some((
                vec![out_channels, in_channels, KERNEL, KERNEL],
                vec![out_channels],
            )),
            _ => None,
        }
    }

    pub fn activation(&self) -> Activation {
        match *self {
            LayerSpec::Dense { activation, .. } | LayerSpec::Conv2d { activation, .. } => activation,
            _ => Activation::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = NetworkSpec {
            input_shape,
            layers,
        };
        spec.shapes()?;
        Ok(spec)
    }

    /// Input shape followed by the output shape of every layer.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "invalid input shape {:?}",
                self.input_shape
            )));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().expect("nonempty"))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().expect("nonempty"))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(LayerSpec::param_shapes)
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_preserves_extent() {
        let spec = NetworkSpec::new(
            vec![1, 24, 8],
            vec![
                LayerSpec::conv(1, 16, Activation::Relu),
                LayerSpec::conv(16, 38, Activation::Relu),
                LayerSpec::Flatten,
            ],
        )
        .unwrap();
        assert_eq!(spec.output_shape().unwrap(), vec![24 * 8 * 38]);
        assert_eq!(24 * 8 * 38, 7296);
    }

    #[test]
    fn incompatible_layers_rejected() {
        assert!(NetworkSpec::new(vec![10], vec![LayerSpec::dense(9, 3, Activation::Relu)]).is_err());
        assert!(NetworkSpec::new(vec![2, 4, 4], vec![LayerSpec::conv(1, 3, Activation::Relu)]).is_err());
        assert!(NetworkSpec::new(vec![10], vec![]).is_err());
        assert!(NetworkSpec::new(vec![10], vec![LayerSpec::Reshape { shape: vec![3, 3] }]).is_err());
    }

    #[test]
    fn activations_at_zero() {
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
