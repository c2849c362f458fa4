use serde::{Deserialize, Serialize};

use super::{check_training, log_sum_exp};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::nn::sigmoid;

pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnnKernel {
    pub class: Label,
    pub center: Vec<f64>,
}

/// Probabilistic neural network: class-tagged Gaussian kernels sharing one bandwidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnnModel {
    pub kernels: Vec<PnnKernel>,
    pub sigma: f64,
}

/// `exp(−‖x − K‖² / 2σ²)`, in (0, 1].
pub fn pnn_phi(x: &[f64], kernel: &[f64], sigma: f64) -> f64 {
    log_phi(x, kernel, sigma).exp()
}

fn log_phi(x: &[f64], kernel: &[f64], sigma: f64) -> f64 {
    let d: f64 = x.iter().zip(kernel).map(|(a, b)| (a - b) * (a - b)).sum();
    -d / (2.0 * sigma * sigma)
}

/// Class likelihood `Σφ / (Σφ + n − n·max φ)` over one class's kernels.
pub fn pnn_probability<K: AsRef<[f64]>>(x: &[f64], kernels: &[K], sigma: f64) -> f64 {
    let lp: Vec<f64> = kernels.iter().map(|k| log_phi(x, k.as_ref(), sigma)).collect();
    class_terms(&lp, false).0.exp()
}

/// `log P` for one class from its kernels' `log φ`, and optionally
/// `∂ log P / ∂ log φᵢ`. Empty input gives `−∞`.
fn class_terms(log_phis: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
    if log_phis.is_empty() {
        return (f64::NEG_INFINITY, Vec::new());
    }
    let n = log_phis.len() as f64;
    let lse = log_sum_exp(log_phis);
    let (arg, log_m) = log_phis
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let one_minus_m = -log_m.exp_m1();
    let log_d = (lse.exp() + n * one_minus_m).ln();
    let log_d = if log_d.is_finite() { log_d } else { lse };
    let log_p = (lse - log_d).min(0.0);
    if !want_grad {
        return (log_p, Vec::new());
    }
    let mut g: Vec<f64> = log_phis.iter().map(|&l| (l - lse).exp() - (l - log_d).exp()).collect();
    g[arg] += n * (log_m - log_d).exp();
    (log_p, g)
}

/// Gradients of the classification-stage loss with respect to PNN parameters.
#[derive(Clone, Debug)]
pub(crate) struct PnnGrad {
    /// Row-major `[kernels, dim]`.
    pub centers: Vec<f64>,
    pub log_sigma: f64,
}

impl PnnGrad {
    pub fn zeros(pnn: &PnnModel) -> Self {
        PnnGrad {
            centers: vec![0.0; pnn.kernels.len() * pnn.dim()],
            log_sigma: 0.0,
        }
    }
}

impl PnnModel {
    pub fn new(kernels: Vec<PnnKernel>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("pnn sigma must be positive, got {sigma}")));
        }
        let Some(first) = kernels.first() else {
            return Err(Error::Empty("pnn kernels"));
        };
        let dim = first.center.len();
        if let Some(k) = kernels.iter().find(|k| k.center.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: k.center.len(),
            });
        }
        Ok(PnnModel { kernels, sigma })
    }

    /// One kernel per training sample.
    pub fn from_samples(xs: &[Vec<f64>], ys: &[Label], sigma: f64) -> Result<Self> {
        check_training(xs, ys)?;
        let kernels = xs
            .iter()
            .zip(ys)
            .map(|(x, &class)| PnnKernel {
                class,
                center: x.clone(),
            })
            .collect();
        Self::new(kernels, sigma)
    }

    pub fn dim(&self) -> usize {
        self.kernels[0].center.len()
    }

    pub fn count(&self, class: Label) -> usize {
        self.kernels.iter().filter(|k| k.class == class).count()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `log P` per class (index by [`Label::index`]).
    pub fn class_log_probabilities(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check(x)?;
        let mut per_class: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for k in &self.kernels {
            per_class[k.class.index()].push(log_phi(x, &k.center, self.sigma));
        }
        Ok([0, 1].map(|c| class_terms(&per_class[c], false).0))
    }

    pub fn class_probabilities(&self, x: &[f64]) -> Result<[f64; 2]> {
        Ok(self.class_log_probabilities(x)?.map(f64::exp))
    }

    /// Reported UTI probability `P_UTI / (P_UTI + P_NonUTI)`; 0.5 when both vanish.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        let [n, u] = self.class_log_probabilities(x)?;
        Ok(report(u, n))
    }

    /// Class with the larger `P`; ties go to [`Label::NonUti`].
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let [n, u] = self.class_log_probabilities(x)?;
        Ok(if u > n { Label::Uti } else { Label::NonUti })
    }

    /// New model with one more kernel; existing kernels and σ are copied unchanged.
    pub fn add_kernel(&self, latent: &[f64], class: Label) -> Result<PnnModel> {
        self.check(latent)?;
        let mut next = self.clone();
        next.kernels.push(PnnKernel {
            class,
            center: latent.to_vec(),
        });
        Ok(next)
    }

    /// Binary cross-entropy of the reported probability against `label`, its
    /// gradient with respect to `x` (returned) and, accumulated into `grad`,
    /// with respect to kernel centers and `log σ`. `exclude` drops one kernel
    /// from its class when that class keeps at least one other.
    pub(crate) fn bce_gradient(
        &self,
        x: &[f64],
        label: Label,
        exclude: Option<usize>,
        grad: &mut PnnGrad,
    ) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        let exclude = exclude.filter(|&i| self.count(self.kernels[i].class) >= 2);
        let mut idx: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut lphi: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (i, k) in self.kernels.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            idx[k.class.index()].push(i);
            lphi[k.class.index()].push(log_phi(x, &k.center, self.sigma));
        }
        let (lp_n, g_n) = class_terms(&lphi[0], true);
        let (lp_u, g_u) = class_terms(&lphi[1], true);
        let z = lp_u - lp_n;
        let y = label.index() as f64;
        let dim = x.len();
        let mut dx = vec![0.0; dim];
        if !z.is_finite() {
            return Ok((if (z > 0.0) == label.is_positive() { 0.0 } else { f64::INFINITY }, dx));
        }
        let loss = z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let dz = sigmoid(z) - y;
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        for (c, g, sign) in [(0, &g_n, -dz), (1, &g_u, dz)] {
            for (j, (&i, &gi)) in idx[c].iter().zip(g.iter()).enumerate() {
                let w = sign * gi;
                if w == 0.0 {
                    continue;
                }
                let center = &self.kernels[i].center;
                let row = &mut grad.centers[i * dim..(i + 1) * dim];
                for d in 0..dim {
                    let diff = (x[d] - center[d]) * inv_s2;
                    dx[d] -= w * diff;
                    row[d] += w * diff;
                }
                grad.log_sigma -= 2.0 * w * lphi[c][j];
            }
        }
        Ok((loss, dx))
    }
}

pub(crate) fn report(log_uti: f64, log_non: f64) -> f64 {
    if log_uti == f64::NEG_INFINITY && log_non == f64::NEG_INFINITY {
        0.5
    } else {
        sigmoid(log_uti - log_non)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{NonUti, Uti};

    #[test]
    fn phi_values() {
        assert_eq!(pnn_phi(&[1.0, 2.0], &[1.0, 2.0], 0.3), 1.0);
        let sigma: f64 = 0.7;
        let r = (2.0 * sigma * sigma).sqrt();
        let v = pnn_phi(&[r, 0.0], &[0.0, 0.0], sigma);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn probability_identities() {
        let x = [0.0, 0.0];
        assert_eq!(pnn_probability(&x, &[x, x, x], 1.0), 1.0);
        // three kernels on a circle of radius 1 around x: all φ = e^{-1/2}
        let ks = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
        let c = (-0.5f64).exp();
        assert!((pnn_probability(&x, &ks, 1.0) - c).abs() < 1e-15);
        assert!(pnn_probability(&[1e6, 0.0], &ks, 1.0) < 1e-300);
    }

    #[test]
    fn far_away_points() {
        let m = PnnModel::from_samples(&[vec![0.0], vec![1.0]], &[NonUti, Uti], 0.01).unwrap();
        // both likelihoods underflow in linear space; their ratio does not
        assert_eq!(m.class_probabilities(&[1e9]).unwrap(), [0.0, 0.0]);
        assert_eq!(m.predict(&[1e9]).unwrap(), Uti);
        assert_eq!(m.predict(&[-1e9]).unwrap(), NonUti);
        assert_eq!(m.probability(&[f64::INFINITY]).unwrap(), 0.5);
        assert_eq!(m.predict(&[f64::INFINITY]).unwrap(), NonUti);
    }

    #[test]
    fn add_kernel_is_monotone_and_structural() {
        let m = PnnModel::from_samples(&[vec![0.0], vec![2.0], vec![3.0]], &[NonUti, Uti, Uti], 1.0).unwrap();
        let x = [0.4];
        let before = m.class_probabilities(&x).unwrap()[1];
        let next = m.add_kernel(&x, Uti).unwrap();
        assert_eq!(next.kernels.len(), 4);
        assert_eq!(next.kernels[..3], m.kernels[..]);
        assert_eq!(next.sigma, m.sigma);
        assert!(next.class_probabilities(&x).unwrap()[1] >= before);
        assert!(next.probability(&x).unwrap() > m.probability(&x).unwrap());
        assert!(m.add_kernel(&[1.0, 2.0], Uti).is_err());
    }

    #[test]
    fn invalid_sigma() {
        assert!(PnnModel::from_samples(&[vec![0.0]], &[Uti], 0.0).is_err());
        assert!(PnnModel::from_samples(&[vec![0.0]], &[Uti], f64::NAN).is_err());
    }

    fn loss_of(m: &PnnModel, x: &[f64], y: Label, excl: Option<usize>) -> f64 {
        let mut g = PnnGrad::zeros(m);
        m.bce_gradient(x, y, excl, &mut g).unwrap().0
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let xs = vec![vec![0.1, -0.3], vec![0.9, 0.4], vec![-0.5, 0.8], vec![1.2, -0.7], vec![0.3, 0.3]];
        let ys = vec![NonUti, Uti, NonUti, Uti, Uti];
        let m = PnnModel::from_samples(&xs, &ys, 0.8).unwrap();
        let x = vec![0.35, 0.05];
        let h = 1e-6;
        for (y, excl) in [(Uti, None), (NonUti, Some(1)), (Uti, Some(4))] {
            let mut g = PnnGrad::zeros(&m);
            let (_, dx) = m.bce_gradient(&x, y, excl, &mut g).unwrap();
            for d in 0..2 {
                let mut xp = x.clone();
                xp[d] += h;
                let mut xm = x.clone();
                xm[d] -= h;
                let num = (loss_of(&m, &xp, y, excl) - loss_of(&m, &xm, y, excl)) / (2.0 * h);
                assert!((num - dx[d]).abs() < 1e-6, "dx[{d}] {num} vs {}", dx[d]);
            }
            for i in 0..xs.len() {
                for d in 0..2 {
                    let mut mp = m.clone();
                    mp.kernels[i].center[d] += h;
                    let mut mm = m.clone();
                    mm.kernels[i].center[d] -= h;
                    let num = (loss_of(&mp, &x, y, excl) - loss_of(&mm, &x, y, excl)) / (2.0 * h);
                    let got = g.centers[i * 2 + d];
                    assert!((num - got).abs() < 1e-6, "K[{i}][{d}] {num} vs {got}");
                }
            }
            let mut mp = m.clone();
            mp.sigma = (m.sigma.ln() + h).exp();
            let mut mm = m.clone();
            mm.sigma = (m.sigma.ln() - h).exp();
            let num = (loss_of(&mp, &x, y, excl) - loss_of(&mm, &x, y, excl)) / (2.0 * h);
            assert!((num - g.log_sigma).abs() < 1e-6, "log σ {num} vs {}", g.log_sigma);
        }
    }

    #[test]
    fn leave_one_out_keeps_singleton_classes() {
        let m = PnnModel::from_samples(&[vec![0.0], vec![1.0]], &[NonUti, Uti], 1.0).unwrap();
        let with = loss_of(&m, &[1.0], Uti, None);
        assert_eq!(loss_of(&m, &[1.0], Uti, Some(1)), with);
    }
}
