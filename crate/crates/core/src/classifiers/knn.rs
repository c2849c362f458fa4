use serde::{Deserialize, Serialize};

use super::check_training;
use crate::data::Label;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

/// Euclidean k-nearest-neighbour vote over the stored training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

pub fn fit_knn(xs: &[Vec<f64>], ys: &[Label], k: usize) -> Result<KnnModel> {
    check_training(xs, ys)?;
    if k == 0 || k > xs.len() {
        return Err(Error::InvalidConfig(format!("knn k={k} outside 1..={}", xs.len())));
    }
    Ok(KnnModel {
        k,
        points: xs.to_vec(),
        labels: ys.to_vec(),
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Indices of the k nearest training points; equal distances keep training order.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(d.into_iter().take(self.k).map(|(_, i)| i).collect())
    }

    /// Fraction of UTI votes among the neighbours.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        let nb = self.neighbours(x)?;
        Ok(nb.iter().filter(|&&i| self.labels[i].is_positive()).count() as f64 / nb.len() as f64)
    }

    /// Majority vote; an even-k tie goes to the nearest neighbour's label.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let nb = self.neighbours(x)?;
        let pos = nb.iter().filter(|&&i| self.labels[i].is_positive()).count();
        let neg = nb.len() - pos;
        Ok(match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => Label::Uti,
            std::cmp::Ordering::Less => Label::NonUti,
            std::cmp::Ordering::Equal => self.labels[nb[0]],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{NonUti, Uti};

    #[test]
    fn k1_recovers_training_labels() {
        let xs = vec![vec![0.0], vec![1.0], vec![5.0]];
        let ys = vec![Uti, NonUti, Uti];
        let m = fit_knn(&xs, &ys, 1).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(m.predict(x).unwrap(), *y);
        }
    }

    #[test]
    fn majority_among_equidistant() {
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let m = fit_knn(&xs, &[Uti, Uti, NonUti], 3).unwrap();
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), Uti);
        assert!((m.probability(&[0.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_ties_prefer_earlier_index() {
        let xs = vec![vec![1.0], vec![-1.0], vec![9.0]];
        let m = fit_knn(&xs, &[NonUti, Uti, Uti], 1).unwrap();
        assert_eq!(m.neighbours(&[0.0]).unwrap(), vec![0]);
        assert_eq!(m.predict(&[0.0]).unwrap(), NonUti);
    }

    #[test]
    fn k_out_of_range() {
        assert!(fit_knn(&[vec![0.0]], &[Uti], 2).is_err());
        assert!(fit_knn(&[vec![0.0]], &[Uti], 0).is_err());
    }
}
