//! Unsupervised feature extractors trained on the unlabelled corpus.
//!
//! | kind | encoder                                   | latent | decoder                          |
//! |------|-------------------------------------------|--------|----------------------------------|
//! | ae   | dense 171                                 | 171    | dense D                          |
//! | de   | dense 128 → 64 → 20                       | 20     | dense 64 → 128 → D               |
//! | cae  | conv 16 → conv 38 (3×3, same) → flatten   | 7296   | conv 8 → conv 1                  |
//! | rbm  | hidden probabilities                      | 64     | (none at inference)              |
//!
//! `D` is the flattened input width, 24 × nodes (+ any extra channels).
//! Inputs are flattened hour-major, the layout of [`DailyActivityMatrix::flatten`].
//!
//! [`DailyActivityMatrix::flatten`]: crate::data::DailyActivityMatrix::flatten

mod rbm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use rbm::{train_rbm, RbmConfig, RbmModel, RbmTraining};

use crate::data::HOURS;
use crate::error::{Error, Result};
use crate::nn::{self, Activation, LayerSpec, NamedArrays, Network, NetworkSpec, Tensor, TrainConfig};

pub const AE_LATENT: usize = 171;
pub const DE_HIDDEN: [usize; 2] = [128, 64];
pub const DE_LATENT: usize = 20;
pub const CAE_FILTERS: [usize; 2] = [16, 38];
pub const CAE_DECODER_FILTERS: [usize; 2] = [8, 1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Ae,
    De,
    Cae,
    Rbm,
}

impl ExtractorKind {
    pub fn name(self) -> &'static str {
        match self {
            ExtractorKind::Ae => "ae",
            ExtractorKind::De => "de",
            ExtractorKind::Cae => "cae",
            ExtractorKind::Rbm => "rbm",
        }
    }
}

impl fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExtractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(ExtractorKind::Ae),
            "de" => Ok(ExtractorKind::De),
            "cae" => Ok(ExtractorKind::Cae),
            "rbm" => Ok(ExtractorKind::Rbm),
            other => Err(Error::InvalidConfig(format!("unknown extractor `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub nodes: usize,
    /// Extra inputs appended after the 24×nodes grid; widens the first and last
    /// dense layers. Not supported by the convolutional extractor.
    pub extra_inputs: usize,
    pub train: TrainConfig,
    pub rbm: RbmConfig,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            nodes: 8,
            extra_inputs: 0,
            train: TrainConfig::default(),
            rbm: RbmConfig::default(),
        }
    }
}

impl ExtractorConfig {
    pub fn input_dim(&self) -> usize {
        HOURS * self.nodes + self.extra_inputs
    }
}

/// Encoder and decoder specs for the network-based extractors.
pub fn architecture(kind: ExtractorKind, cfg: &ExtractorConfig) -> Result<(NetworkSpec, NetworkSpec)> {
    let d = cfg.input_dim();
    use Activation::{Identity, Relu};
    match kind {
        ExtractorKind::Ae => Ok((
            NetworkSpec::new(vec![d], vec![LayerSpec::dense(d, AE_LATENT, Relu)])?,
            NetworkSpec::new(vec![AE_LATENT], vec![LayerSpec::dense(AE_LATENT, d, Identity)])?,
        )),
        ExtractorKind::De => {
            let [h1, h2] = DE_HIDDEN;
            Ok((
                NetworkSpec::new(
                    vec![d],
                    vec![
                        LayerSpec::dense(d, h1, Relu),
                        LayerSpec::dense(h1, h2, Relu),
                        LayerSpec::dense(h2, DE_LATENT, Identity),
                    ],
                )?,
                NetworkSpec::new(
                    vec![DE_LATENT],
                    vec![
                        LayerSpec::dense(DE_LATENT, h2, Relu),
                        LayerSpec::dense(h2, h1, Relu),
                        LayerSpec::dense(h1, d, Identity),
                    ],
                )?,
            ))
        }
        ExtractorKind::Cae => {
            if cfg.extra_inputs != 0 {
                return Err(Error::InvalidConfig(
                    "the convolutional extractor takes the 24×N grid only".into(),
                ));
            }
            let n = cfg.nodes;
            let [f1, f2] = CAE_FILTERS;
            let [g1, g2] = CAE_DECODER_FILTERS;
            Ok((
                NetworkSpec::new(
                    vec![d],
                    vec![
                        LayerSpec::Reshape { shape: vec![1, HOURS, n] },
                        LayerSpec::conv(1, f1, Relu),
                        LayerSpec::conv(f1, f2, Relu),
                        LayerSpec::Flatten,
                    ],
                )?,
                NetworkSpec::new(
                    vec![f2 * HOURS * n],
                    vec![
                        LayerSpec::Reshape { shape: vec![f2, HOURS, n] },
                        LayerSpec::conv(f2, g1, Relu),
                        LayerSpec::conv(g1, g2, Identity),
                        LayerSpec::Flatten,
                    ],
                )?,
            ))
        }
        ExtractorKind::Rbm => Err(Error::InvalidConfig("the rbm has no network architecture".into())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EncoderBody {
    AutoEncoder { encoder: Network, decoder: Network },
    Rbm(RbmModel),
}

/// A trained (or freshly initialized) feature extractor.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderModel {
    pub kind: ExtractorKind,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub body: EncoderBody,
}

/// Extractor plus the reconstruction loss (or RBM free-energy) curve.
#[derive(Clone, Debug)]
pub struct TrainedExtractor {
    pub model: EncoderModel,
    pub curve: Vec<f64>,
}

impl EncoderModel {
    /// Untrained model with the default architecture of `kind`.
    pub fn init(kind: ExtractorKind, cfg: &ExtractorConfig, seed: u64) -> Result<Self> {
        if kind == ExtractorKind::Rbm {
            let d = cfg.input_dim();
            let h = cfg.rbm.hidden_dim;
            return Ok(EncoderModel {
                kind,
                input_dim: d,
                latent_dim: h,
                body: EncoderBody::Rbm(RbmModel {
                    n_visible: d,
                    n_hidden: h,
                    weights: vec![0.0; d * h],
                    visible_bias: vec![0.0; d],
                    hidden_bias: vec![0.0; h],
                    visible_scale: vec![1.0; d],
                }),
            });
        }
        let (enc, dec) = architecture(kind, cfg)?;
        let latent_dim = enc.output_shape()?.iter().product();
        Ok(EncoderModel {
            kind,
            input_dim: cfg.input_dim(),
            latent_dim,
            body: EncoderBody::AutoEncoder {
                encoder: Network::init(enc, seed)?,
                decoder: Network::init(dec, seed.wrapping_add(1))?,
            },
        })
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Latent features of one normalized, flattened day.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        match &self.body {
            EncoderBody::AutoEncoder { encoder, .. } => Ok(encoder.forward(&Tensor::vector(x.to_vec()))?.into_data()),
            EncoderBody::Rbm(rbm) => rbm.encode(x),
        }
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        match &self.body {
            EncoderBody::AutoEncoder { encoder, decoder } => {
                let z = encoder.forward(&Tensor::vector(x.to_vec()))?;
                Ok(decoder.forward(&z)?.into_data())
            }
            EncoderBody::Rbm(rbm) => {
                let v = rbm.visible_probs(&rbm.hidden_probs(&rbm.visible(x)));
                Ok(v.iter().zip(&rbm.visible_scale).map(|(p, s)| p * s).collect())
            }
        }
    }

    pub fn reconstruction_mse(&self, data: &[Vec<f64>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("reconstruction data"));
        }
        let mut total = 0.0;
        for x in data {
            let r = self.reconstruct(x)?;
            total += nn::Loss::Mse.value(&r, x);
        }
        Ok(total / data.len() as f64)
    }

    pub fn networks(&self) -> Option<(&Network, &Network)> {
        match &self.body {
            EncoderBody::AutoEncoder { encoder, decoder } => Some((encoder, decoder)),
            EncoderBody::Rbm(_) => None,
        }
    }

    pub fn networks_mut(&mut self) -> Option<(&mut Network, &mut Network)> {
        match &mut self.body {
            EncoderBody::AutoEncoder { encoder, decoder } => Some((encoder, decoder)),
            EncoderBody::Rbm(_) => None,
        }
    }

    /// Parameter-snapshot representation with `kind`, `input_dim` and `latent_dim` headers.
    pub fn to_named(&self) -> NamedArrays {
        let mut named = NamedArrays::default();
        named.headers.push(("kind".into(), self.kind.name().into()));
        named.headers.push(("input_dim".into(), self.input_dim.to_string()));
        named.headers.push(("latent_dim".into(), self.latent_dim.to_string()));
        match &self.body {
            EncoderBody::AutoEncoder { encoder, decoder } => {
                for part in [encoder.to_named("encoder."), decoder.to_named("decoder.")] {
                    named.headers.extend(part.headers);
                    named.arrays.extend(part.arrays);
                }
            }
            EncoderBody::Rbm(rbm) => {
                named.arrays.push((
                    "rbm.weights".into(),
                    Tensor::new(vec![rbm.n_visible, rbm.n_hidden], rbm.weights.clone()).expect("rbm shape"),
                ));
                named.arrays.push(("rbm.visible_bias".into(), Tensor::vector(rbm.visible_bias.clone())));
                named.arrays.push(("rbm.hidden_bias".into(), Tensor::vector(rbm.hidden_bias.clone())));
                named.arrays.push(("rbm.visible_scale".into(), Tensor::vector(rbm.visible_scale.clone())));
            }
        }
        named
    }

    pub fn from_named(named: &NamedArrays) -> Result<Self> {
        let header = |k: &str| {
            named
                .header(k)
                .ok_or_else(|| Error::parse("extractor snapshot", format!("missing `{k}` header")))
        };
        let kind: ExtractorKind = header("kind")?.parse()?;
        let input_dim: usize = header("input_dim")?.parse().map_err(|e| Error::parse("input_dim", e))?;
        let latent_dim: usize = header("latent_dim")?.parse().map_err(|e| Error::parse("latent_dim", e))?;
        let body = if kind == ExtractorKind::Rbm {
            let get = |name: &str| {
                named
                    .arrays
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, t)| t.data().to_vec())
                    .ok_or_else(|| Error::parse("extractor snapshot", format!("missing `{name}`")))
            };
            let rbm = RbmModel {
                n_visible: input_dim,
                n_hidden: latent_dim,
                weights: get("rbm.weights")?,
                visible_bias: get("rbm.visible_bias")?,
                hidden_bias: get("rbm.hidden_bias")?,
                visible_scale: get("rbm.visible_scale")?,
            };
            if rbm.weights.len() != input_dim * latent_dim {
                return Err(Error::DimensionMismatch {
                    expected: input_dim * latent_dim,
                    got: rbm.weights.len(),
                });
            }
            EncoderBody::Rbm(rbm)
        } else {
            EncoderBody::AutoEncoder {
                encoder: Network::from_named(named, "encoder.")?,
                decoder: Network::from_named(named, "decoder.")?,
            }
        };
        Ok(EncoderModel {
            kind,
            input_dim,
            latent_dim,
            body,
        })
    }

    pub fn to_text(&self) -> String {
        self.to_named().to_text()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_named(&NamedArrays::from_text(text)?)
    }
}

impl Serialize for EncoderModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for EncoderModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        EncoderModel::from_text(&text).map_err(serde::de::Error::custom)
    }
}

fn concat(encoder: &Network, decoder: &Network) -> Result<Network> {
    let mut layers = encoder.spec().layers.clone();
    layers.extend(decoder.spec().layers.iter().cloned());
    let spec = NetworkSpec::new(encoder.spec().input_shape.clone(), layers)?;
    let params = encoder.params().iter().chain(decoder.params()).cloned().collect();
    Network::from_parts(spec, params)
}

fn split(joined: Network, encoder: &Network, decoder: &Network) -> Result<(Network, Network)> {
    let n_enc = encoder.params().len();
    let mut params = joined.params().to_vec();
    let dec_params = params.split_off(n_enc);
    Ok((
        Network::from_parts(encoder.spec().clone(), params)?,
        Network::from_parts(decoder.spec().clone(), dec_params)?,
    ))
}

/// Trains an extractor on normalized, flattened unlabelled days.
///
/// Network extractors minimise reconstruction mse; the RBM runs CD-1 on inputs
/// rescaled to [0, 1] by the per-feature corpus maximum.
pub fn train_extractor(unlabelled: &[Vec<f64>], kind: ExtractorKind, cfg: &ExtractorConfig) -> Result<TrainedExtractor> {
    if unlabelled.is_empty() {
        return Err(Error::Empty("unlabelled corpus"));
    }
    if let Some(bad) = unlabelled.iter().find(|x| x.len() != cfg.input_dim()) {
        return Err(Error::DimensionMismatch {
            expected: cfg.input_dim(),
            got: bad.len(),
        });
    }
    if kind == ExtractorKind::Rbm {
        let trained = train_rbm(unlabelled, &cfg.rbm)?;
        let latent_dim = trained.model.n_hidden;
        return Ok(TrainedExtractor {
            model: EncoderModel {
                kind,
                input_dim: cfg.input_dim(),
                latent_dim,
                body: EncoderBody::Rbm(trained.model),
            },
            curve: trained.free_energy,
        });
    }
    let mut model = EncoderModel::init(kind, cfg, cfg.train.seed)?;
    let (encoder, decoder) = model.networks().expect("network extractor");
    let joined = concat(encoder, decoder)?;
    let inputs: Vec<Tensor> = unlabelled.iter().map(|x| Tensor::vector(x.clone())).collect();
    let trained = nn::train(joined, &inputs, &inputs, &cfg.train)?;
    let (enc, dec) = split(trained.network, encoder, decoder)?;
    model.body = EncoderBody::AutoEncoder {
        encoder: enc,
        decoder: dec,
    };
    Ok(TrainedExtractor {
        model,
        curve: trained.loss_curve,
    })
}
