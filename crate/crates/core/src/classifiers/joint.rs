use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pnn::{PnnGrad, PnnModel, DEFAULT_SIGMA};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::extractors::{EncoderBody, EncoderModel};
use crate::nn::{Loss, Optimizer, OptimizerState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointSchedule {
    pub epochs: usize,
    pub encoder_lr: f64,
    pub pnn_lr: f64,
    pub batch_size: usize,
    /// Unlabelled days reconstructed per clustering stage.
    pub unlabelled_per_epoch: usize,
    pub initial_sigma: f64,
    pub seed: u64,
}

impl Default for JointSchedule {
    fn default() -> Self {
        JointSchedule {
            epochs: 30,
            encoder_lr: 1e-3,
            pnn_lr: 0.01,
            batch_size: 16,
            unlabelled_per_epoch: 256,
            initial_sigma: DEFAULT_SIGMA,
            seed: 0,
        }
    }
}

impl JointSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.encoder_lr > 0.0 && self.pnn_lr > 0.0) {
            return Err(Error::InvalidConfig("joint learning rates must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("joint batch size must be at least 1".into()));
        }
        if !(self.initial_sigma > 0.0) {
            return Err(Error::InvalidConfig("initial sigma must be positive".into()));
        }
        Ok(())
    }
}

/// One labelled day: normalized encoder input, inputs appended after the latent
/// (physiological channels, possibly empty), label, and the kernel it seeded.
#[derive(Clone, Debug)]
pub struct JointSample {
    pub input: Vec<f64>,
    pub extra: Vec<f64>,
    pub label: Label,
    pub own_kernel: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct JointTraining {
    pub encoder: EncoderModel,
    pub pnn: PnnModel,
    pub classification_loss: Vec<f64>,
    pub clustering_loss: Vec<f64>,
}

/// Latent of `input` followed by `extra`: the PNN input space.
pub fn pnn_input(encoder: &EncoderModel, input: &[f64], extra: &[f64]) -> Result<Vec<f64>> {
    let mut z = encoder.encode(input)?;
    z.extend_from_slice(extra);
    Ok(z)
}

/// PNN with one kernel per labelled sample at its current latent; sets each
/// sample's `own_kernel`.
pub fn init_pnn(encoder: &EncoderModel, labelled: &mut [JointSample], sigma: f64) -> Result<PnnModel> {
    let mut xs = Vec::with_capacity(labelled.len());
    let mut ys = Vec::with_capacity(labelled.len());
    for (i, s) in labelled.iter_mut().enumerate() {
        xs.push(pnn_input(encoder, &s.input, &s.extra)?);
        ys.push(s.label);
        s.own_kernel = Some(i);
    }
    PnnModel::from_samples(&xs, &ys, sigma)
}

/// Alternating training. Each epoch runs a classification stage (cross-entropy
/// on the reported PNN probability over the labelled days, updating encoder,
/// kernels and σ; a day's own kernel is left out) followed by a clustering stage
/// (reconstruction of a sample of unlabelled days, updating encoder and decoder
/// with the PNN fixed). An RBM encoder stays frozen and skips the clustering stage.
pub fn train_joint(
    mut encoder: EncoderModel,
    mut pnn: PnnModel,
    labelled: &[JointSample],
    unlabelled: &[Vec<f64>],
    schedule: &JointSchedule,
) -> Result<JointTraining> {
    schedule.validate()?;
    if !labelled.iter().any(|s| s.label == Label::Uti) {
        return Err(Error::MissingClass("uti"));
    }
    if !labelled.iter().any(|s| s.label == Label::NonUti) {
        return Err(Error::MissingClass("non_uti"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let latent = encoder.latent_dim;
    let mut classification_loss = Vec::with_capacity(schedule.epochs);
    let mut clustering_loss = Vec::new();
    let mut enc_state = encoder
        .networks()
        .map(|(e, d)| (OptimizerState::new(Optimizer::adam(schedule.encoder_lr), e.params()), OptimizerState::new(Optimizer::adam(schedule.encoder_lr), d.params())));
    let mut pnn_params = pnn_tensors(&pnn);
    let mut pnn_state = OptimizerState::new(Optimizer::adam(schedule.pnn_lr), &pnn_params);
    let mut order: Vec<usize> = (0..labelled.len()).collect();
    let mut pool: Vec<usize> = (0..unlabelled.len()).collect();

    for epoch in 0..schedule.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(schedule.batch_size) {
            let mut pgrad = PnnGrad::zeros(&pnn);
            let mut egrads = encoder.networks().map(|(e, _)| e.zero_grads());
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &labelled[i];
                match &encoder.body {
                    EncoderBody::AutoEncoder { encoder: net, .. } => {
                        let trace = net.forward_trace(&Tensor::vector(s.input.clone()))?;
                        let mut x = trace.output().data().to_vec();
                        x.extend_from_slice(&s.extra);
                        let (loss, dx) = pnn.bce_gradient(&x, s.label, s.own_kernel, &mut pgrad)?;
                        batch_loss += loss;
                        let g = Tensor::new(trace.output().shape().to_vec(), dx[..latent].to_vec())?;
                        net.backward(&trace, &g, egrads.as_mut().expect("network grads"));
                    }
                    EncoderBody::Rbm(rbm) => {
                        let mut x = rbm.encode(&s.input)?;
                        x.extend_from_slice(&s.extra);
                        batch_loss += pnn.bce_gradient(&x, s.label, s.own_kernel, &mut pgrad)?.0;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step: 0,
                    detail: format!("classification loss {batch_loss}"),
                });
            }
            total += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let grads = [
                Tensor::new(pnn_params[0].shape().to_vec(), pgrad.centers.iter().map(|g| g * scale).collect())?,
                Tensor::vector(vec![pgrad.log_sigma * scale]),
            ];
            pnn_state.step(&mut pnn_params, &grads);
            write_back(&mut pnn, &pnn_params);
            if let (Some(mut g), Some((enc, _)), Some((state, _))) = (egrads, encoder.networks_mut(), enc_state.as_mut()) {
                g.iter_mut().for_each(|t| t.scale(scale));
                state.step(enc.params_mut(), &g);
            }
        }
        classification_loss.push(total / labelled.len() as f64);

        let Some((enc, dec)) = encoder.networks_mut() else {
            continue;
        };
        let (enc_opt, dec_opt) = enc_state.as_mut().expect("network optimizers");
        if unlabelled.is_empty() || schedule.unlabelled_per_epoch == 0 {
            continue;
        }
        pool.shuffle(&mut rng);
        let take = schedule.unlabelled_per_epoch.min(pool.len());
        let mut total = 0.0;
        for batch in pool[..take].chunks(schedule.batch_size) {
            let mut eg = enc.zero_grads();
            let mut dg = dec.zero_grads();
            for &i in batch {
                let x = Tensor::vector(unlabelled[i].clone());
                let et = enc.forward_trace(&x)?;
                let dt = dec.forward_trace(et.output())?;
                let out = dt.output().data();
                total += Loss::Mse.value(out, x.data());
                let g = Tensor::new(dt.output().shape().to_vec(), Loss::Mse.gradient(out, x.data()))?;
                let dz = dec.backward(&dt, &g, &mut dg);
                enc.backward(&et, &dz, &mut eg);
            }
            let scale = 1.0 / batch.len() as f64;
            eg.iter_mut().chain(dg.iter_mut()).for_each(|t| t.scale(scale));
            if eg.iter().chain(&dg).any(|t| !t.all_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    step: 0,
                    detail: "clustering-stage gradient".into(),
                });
            }
            enc_opt.step(enc.params_mut(), &eg);
            dec_opt.step(dec.params_mut(), &dg);
        }
        clustering_loss.push(total / take as f64);
    }
    Ok(JointTraining {
        encoder,
        pnn,
        classification_loss,
        clustering_loss,
    })
}

fn pnn_tensors(pnn: &PnnModel) -> Vec<Tensor> {
    let centers: Vec<f64> = pnn.kernels.iter().flat_map(|k| k.center.iter().copied()).collect();
    vec![
        Tensor::new(vec![pnn.kernels.len(), pnn.dim()], centers).expect("kernel table shape"),
        Tensor::vector(vec![pnn.sigma.ln()]),
    ]
}

fn write_back(pnn: &mut PnnModel, params: &[Tensor]) {
    let dim = pnn.dim();
    for (k, row) in pnn.kernels.iter_mut().zip(params[0].data().chunks(dim)) {
        k.center.copy_from_slice(row);
    }
    pnn.sigma = params[1].data()[0].exp();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractors::{train_extractor, ExtractorConfig, ExtractorKind};
    use crate::nn::TrainConfig;

    fn day(i: usize, positive: bool) -> Vec<f64> {
        (0..192)
            .map(|j| {
                let base = (((i * 13 + j * 5) % 7) as f64) / 20.0;
                if positive && j % 8 == 3 {
                    base + 0.8
                } else {
                    base
                }
            })
            .collect()
    }

    fn setup(kind: ExtractorKind) -> (EncoderModel, Vec<JointSample>, Vec<Vec<f64>>) {
        let unlabelled: Vec<Vec<f64>> = (0..40).map(|i| day(i, i % 5 == 0)).collect();
        let cfg = ExtractorConfig {
            train: TrainConfig {
                epochs: 5,
                batch_size: 8,
                max_steps: None,
                ..Default::default()
            },
            ..Default::default()
        };
        let enc = train_extractor(&unlabelled, kind, &cfg).unwrap().model;
        let labelled = (0..16)
            .map(|i| JointSample {
                input: day(100 + i, i % 2 == 1),
                extra: vec![],
                label: Label::from_index(i % 2),
                own_kernel: None,
            })
            .collect();
        (enc, labelled, unlabelled)
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (enc, mut lab, unl) = setup(ExtractorKind::De);
        let pnn = init_pnn(&enc, &mut lab, 1.0).unwrap();
        let sched = JointSchedule {
            epochs: 0,
            ..Default::default()
        };
        let out = train_joint(enc.clone(), pnn.clone(), &lab, &unl, &sched).unwrap();
        assert_eq!(out.encoder, enc);
        assert_eq!(out.pnn, pnn);
    }

    #[test]
    fn deterministic_and_separating() {
        let (enc, mut lab, unl) = setup(ExtractorKind::De);
        let pnn = init_pnn(&enc, &mut lab, 1.0).unwrap();
        let sched = JointSchedule {
            epochs: 15,
            seed: 3,
            ..Default::default()
        };
        let a = train_joint(enc.clone(), pnn.clone(), &lab, &unl, &sched).unwrap();
        let b = train_joint(enc, pnn, &lab, &unl, &sched).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.pnn, b.pnn);
        assert_eq!(a.clustering_loss.len(), 15);
        let mean = |positive: bool| {
            let ps: Vec<f64> = (0..10)
                .map(|i| {
                    let x = pnn_input(&a.encoder, &day(500 + i, positive), &[]).unwrap();
                    a.pnn.probability(&x).unwrap()
                })
                .collect();
            ps.iter().sum::<f64>() / ps.len() as f64
        };
        assert!(mean(true) > mean(false));
    }

    #[test]
    fn rbm_encoder_is_frozen() {
        let (enc, mut lab, unl) = setup(ExtractorKind::Rbm);
        let pnn = init_pnn(&enc, &mut lab, 1.0).unwrap();
        let out = train_joint(enc.clone(), pnn.clone(), &lab, &unl, &JointSchedule { epochs: 3, ..Default::default() }).unwrap();
        assert_eq!(out.encoder, enc);
        assert!(out.clustering_loss.is_empty());
        assert_ne!(out.pnn, pnn);
    }

    #[test]
    fn single_class_rejected() {
        let (enc, mut lab, unl) = setup(ExtractorKind::Ae);
        lab.iter_mut().for_each(|s| s.label = Label::Uti);
        let pnn = init_pnn(&enc, &mut lab, 1.0).unwrap();
        assert!(matches!(
            train_joint(enc, pnn, &lab, &unl, &JointSchedule::default()),
            Err(Error::MissingClass("non_uti"))
        ));
    }
}
