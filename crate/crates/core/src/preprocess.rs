//! Lagrangian normalization, physiological imputation and the 11×N windowed
//! statistics used by the conventional classifiers.
//!
//! Normalization is x̂ᵢ = xᵢ / (2λᵢ) where λᵢ solves E[xᵢ²] − 4λᵢ² = 0 over the
//! unlabelled corpus, i.e. λᵢ = rms(xᵢ) / 2, floored at `epsilon`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{DailyActivityMatrix, PhysChannel, HOURS};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub lambda: Vec<f64>,
    pub epsilon: f64,
    pub corpus_size: usize,
}

/// Fits λ on the flattened (row-major) matrices of an unlabelled corpus.
pub fn fit_lagrangian(unlabelled: &[DailyActivityMatrix]) -> Result<NormalizationParams> {
    let rows: Vec<Vec<f64>> = unlabelled.iter().map(DailyActivityMatrix::flatten).collect();
    fit_lagrangian_vectors(&rows, DEFAULT_EPSILON)
}

pub fn fit_lagrangian_vectors(samples: &[Vec<f64>], epsilon: f64) -> Result<NormalizationParams> {
    let first = samples.first().ok_or(Error::Empty("unlabelled corpus"))?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    let dim = first.len();
    let mut sum_sq = vec![0.0f64; dim];
    for s in samples {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.len(),
            });
        }
        for (acc, &x) in sum_sq.iter_mut().zip(s) {
            *acc += x * x;
        }
    }
    let n = samples.len() as f64;
    let lambda = sum_sq
        .into_iter()
        .map(|ss| ((ss / n).sqrt() / 2.0).max(epsilon))
        .collect();
    Ok(NormalizationParams {
        lambda,
        epsilon,
        corpus_size: samples.len(),
    })
}

pub fn apply_normalization(x: &[f64], params: &NormalizationParams) -> Result<Vec<f64>> {
    if x.len() != params.lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: params.lambda.len(),
            got: x.len(),
        });
    }
    Ok(x.iter()
        .zip(&params.lambda)
        .map(|(&xi, &l)| xi / (2.0 * l))
        .collect())
}

impl NormalizationParams {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Single-column text: a two-line header, then one λ per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# epsilon={:?}", self.epsilon);
        let _ = writeln!(out, "# corpus_size={}", self.corpus_size);
        for l in &self.lambda {
            let _ = writeln!(out, "{l:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut epsilon = None;
        let mut corpus_size = None;
        let mut lambda = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::parse("normalization header", line))?;
                match k.trim() {
                    "epsilon" => epsilon = Some(v.trim().parse::<f64>().map_err(|e| Error::parse("epsilon", e))?),
                    "corpus_size" => {
                        corpus_size = Some(v.trim().parse::<usize>().map_err(|e| Error::parse("corpus_size", e))?)
                    }
                    _ => {}
                }
            } else {
                lambda.push(line.parse::<f64>().map_err(|e| Error::parse("lambda", e))?);
            }
        }
        let epsilon = epsilon.ok_or_else(|| Error::parse("normalization header", "missing epsilon"))?;
        if lambda.iter().any(|&l| !(l >= epsilon)) {
            return Err(Error::parse("lambda", "value below epsilon"));
        }
        Ok(NormalizationParams {
            lambda,
            epsilon,
            corpus_size: corpus_size.unwrap_or(0),
        })
    }
}

pub const WINDOW_ROWS: usize = 11;

/// Temporal windows in row order: morning, afternoon, evening, night.
pub const WINDOWS: [(usize, usize); 4] = [(6, 12), (12, 18), (18, 24), (0, 6)];

/// 11×N statistics of a day, row-major.
///
/// Rows 0..4 are the window sums, 4..8 the per-node max/min/mean/lower-median of
/// the 24 hourly values, 8..11 the differences afternoon−morning, evening−afternoon
/// and night−evening.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedFeatures {
    pub n_nodes: usize,
    pub rows: Vec<f64>,
}

impl WindowedFeatures {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.n_nodes..(r + 1) * self.n_nodes]
    }
}

pub fn windowed_features(matrix: &DailyActivityMatrix) -> WindowedFeatures {
    let n = matrix.n_nodes();
    let mut rows = vec![0.0; WINDOW_ROWS * n];
    for node in 0..n {
        let hourly: Vec<f64> = matrix.column(node).map(f64::from).collect();
        for (w, &(lo, hi)) in WINDOWS.iter().enumerate() {
            rows[w * n + node] = hourly[lo..hi].iter().sum();
        }
        let mut sorted = hourly.clone();
        sorted.sort_by(f64::total_cmp);
        rows[4 * n + node] = sorted[HOURS - 1];
        rows[5 * n + node] = sorted[0];
        rows[6 * n + node] = hourly.iter().sum::<f64>() / HOURS as f64;
        rows[7 * n + node] = sorted[(HOURS - 1) / 2];
        for d in 0..3 {
            rows[(8 + d) * n + node] = rows[(d + 1) * n + node] - rows[d * n + node];
        }
    }
    WindowedFeatures { n_nodes: n, rows }
}

pub const PHYS_STD_FLOOR: f64 = 1e-6;

/// Per-channel mean and population standard deviation of observed readings,
/// fitted on training data only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysStats {
    pub channels: Vec<PhysChannel>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl PhysStats {
    /// Channels that are never observed are left out, so imputing them later fails.
    pub fn fit(matrices: &[DailyActivityMatrix], channels: &[PhysChannel]) -> Self {
        let mut kept = Vec::new();
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for &ch in channels {
            let values: Vec<f64> = matrices.iter().filter_map(|m| m.phys.as_ref()?.get(ch)).collect();
            if values.is_empty() {
                continue;
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            kept.push(ch);
            means.push(mean);
            stds.push(var.sqrt().max(PHYS_STD_FLOOR));
        }
        PhysStats {
            channels: kept,
            means,
            stds,
        }
    }

    pub fn mean(&self, ch: PhysChannel) -> Option<f64> {
        let i = self.channels.iter().position(|&c| c == ch)?;
        Some(self.means[i])
    }

    /// Output length of [`impute_phys`]: values then the observed mask.
    pub fn width(&self) -> usize {
        2 * self.channels.len()
    }
}

/// [`impute_phys`] output with values z-scored by the training statistics;
/// imputed entries become 0, the mask is unchanged.
pub fn standardized_phys(matrix: &DailyActivityMatrix, stats: &PhysStats) -> Result<Vec<f64>> {
    let mut v = impute_phys(matrix, stats)?;
    for ((x, m), s) in v.iter_mut().zip(&stats.means).zip(&stats.stds) {
        *x = (*x - m) / s;
    }
    Ok(v)
}

/// Observed values pass through, missing ones take the training mean; the
/// observed mask (1/0) is appended.
pub fn impute_phys(matrix: &DailyActivityMatrix, stats: &PhysStats) -> Result<Vec<f64>> {
    if let Some(p) = &matrix.phys {
        if let Some(ch) = p.channels.iter().find(|&&c| stats.mean(c).is_none()) {
            return Err(Error::MissingChannel(ch.name().to_string()));
        }
    }
    let mut values = Vec::with_capacity(stats.width());
    let mut mask = Vec::with_capacity(stats.channels.len());
    for (&ch, &mean) in stats.channels.iter().zip(&stats.means) {
        match matrix.phys.as_ref().and_then(|p| p.get(ch)) {
            Some(v) => {
                values.push(v);
                mask.push(1.0);
            }
            None => {
                values.push(mean);
                mask.push(0.0);
            }
        }
    }
    values.extend(mask);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    use super::*;
    use crate::data::PhysVector;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 3, 1).unwrap()
    }

    #[test]
    fn constant_four_gives_lambda_two() {
        let p = fit_lagrangian_vectors(&vec![vec![4.0]; 5], DEFAULT_EPSILON).unwrap();
        // 4² − 4λ² = 0  ⇒  λ = 2
        assert_eq!(p.lambda, vec![2.0]);
        assert_eq!(apply_normalization(&[4.0], &p).unwrap(), vec![1.0]);
    }

    #[test]
    fn dead_feature_is_floored() {
        let p = fit_lagrangian_vectors(&vec![vec![0.0, 1.0]; 3], DEFAULT_EPSILON).unwrap();
        assert_eq!(p.lambda[0], DEFAULT_EPSILON);
        assert_eq!(apply_normalization(&[0.0, 0.0], &p).unwrap()[0], 0.0);
    }

    #[test]
    fn two_point_mean_square() {
        let p = fit_lagrangian_vectors(&[vec![0.0], vec![4.0]], DEFAULT_EPSILON).unwrap();
        // mean x² = 8, λ = √8 / 2 = √2
        assert_relative_eq!(p.lambda[0], 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_lagrangian(&[]), Err(Error::Empty(_))));
        let p = fit_lagrangian_vectors(&[vec![1.0, 2.0]], DEFAULT_EPSILON).unwrap();
        assert!(matches!(
            apply_normalization(&[1.0], &p),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(fit_lagrangian_vectors(&[vec![1.0], vec![1.0, 2.0]], DEFAULT_EPSILON).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = fit_lagrangian_vectors(&[vec![0.3, 0.0, 7.0], vec![1.1, 0.0, 2.0]], DEFAULT_EPSILON).unwrap();
        let back = NormalizationParams::from_text(&p.to_text()).unwrap();
        assert_eq!(p, back);
        assert!(p.to_text().starts_with("# epsilon=1e-8\n# corpus_size=2\n"));
    }

    #[test]
    fn windows_of_constant_grid() {
        let m = DailyActivityMatrix::from_grid("h", date(), 8, vec![1; 192]).unwrap();
        let f = windowed_features(&m);
        for w in 0..4 {
            assert!(f.row(w).iter().all(|&v| v == 6.0));
        }
        for s in 4..8 {
            assert!(f.row(s).iter().all(|&v| v == 1.0));
        }
        for d in 8..11 {
            assert!(f.row(d).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_morning_count() {
        let mut grid = vec![0; 192];
        grid[7 * 8] = 1;
        let f = windowed_features(&DailyActivityMatrix::from_grid("h", date(), 8, grid).unwrap());
        assert_eq!(f.row(0)[0], 1.0);
        assert!((1..4).all(|w| f.row(w)[0] == 0.0));
        assert_eq!(f.row(4)[0], 1.0);
        assert_eq!(f.row(5)[0], 0.0);
        assert_eq!(f.row(6)[0], 1.0 / 24.0);
        assert_eq!(f.row(7)[0], 0.0);
        assert_eq!(f.row(8)[0], -1.0);
        assert_eq!(f.row(9)[0], 0.0);
        assert_eq!(f.row(10)[0], 0.0);
    }

    #[test]
    fn zero_grid_gives_zero_rows() {
        let f = windowed_features(&DailyActivityMatrix::zeros("h", date(), 8));
        assert!(f.rows.iter().all(|&v| v == 0.0));
        assert_eq!(f.rows.len(), 88);
    }

    #[test]
    fn imputation() {
        let stats = PhysStats {
            channels: PhysChannel::default_set(),
            means: vec![36.8, 70.0],
            stds: vec![0.5, 10.0],
        };
        let mut p = PhysVector::unobserved(&PhysChannel::default_set());
        p.values[0] = 37.9;
        p.observed[0] = true;
        let m = DailyActivityMatrix::zeros("h", date(), 8).with_phys(p);
        assert_eq!(impute_phys(&m, &stats).unwrap(), vec![37.9, 70.0, 1.0, 0.0]);
        let z = standardized_phys(&m, &stats).unwrap();
        assert!((z[0] - 2.2).abs() < 1e-12);
        assert_eq!(z[1..], [0.0, 1.0, 0.0]);

        let m = DailyActivityMatrix::zeros("h", date(), 8)
            .with_phys(PhysVector::unobserved(&PhysChannel::default_set()));
        assert_eq!(impute_phys(&m, &stats).unwrap(), vec![36.8, 70.0, 0.0, 0.0]);

        let partial = PhysStats {
            channels: vec![PhysChannel::Temperature],
            means: vec![36.8],
            stds: vec![0.5],
        };
        assert!(matches!(impute_phys(&m, &partial), Err(Error::MissingChannel(_))));
    }

    #[test]
    fn phys_stats_use_observed_only() {
        let mut p = PhysVector::unobserved(&PhysChannel::default_set());
        p.values = vec![37.0, 99.0];
        p.observed = vec![true, false];
        let a = DailyActivityMatrix::zeros("h", date(), 8).with_phys(p.clone());
        p.values[0] = 36.0;
        let b = DailyActivityMatrix::zeros("h", date(), 8).with_phys(p);
        let s = PhysStats::fit(&[a, b], &PhysChannel::default_set());
        assert_eq!(s.channels, vec![PhysChannel::Temperature]);
        assert_eq!(s.means, vec![36.5]);
        assert_eq!(s.stds, vec![0.5]);
    }

    fn grid_strategy() -> impl Strategy<Value = Vec<u32>> {
        prop::collection::vec(0u32..20, 192)
    }

    proptest! {
        #[test]
        fn window_sums_conserve_column_mass(grid in grid_strategy()) {
            let m = DailyActivityMatrix::from_grid("h", date(), 8, grid).unwrap();
            let f = windowed_features(&m);
            for node in 0..8 {
                let windows: f64 = (0..4).map(|w| f.row(w)[node]).sum();
                let col: u32 = m.column(node).sum();
                prop_assert_eq!(windows, col as f64);
                for d in 0..3 {
                    prop_assert_eq!(f.row(8 + d)[node], f.row(d + 1)[node] - f.row(d)[node]);
                }
            }
        }

        #[test]
        fn lower_median_survives_duplication(values in prop::collection::vec(0u32..50, 24)) {
            let mut sorted = values.clone();
            sorted.sort();
            let mut doubled: Vec<u32> = values.iter().flat_map(|&v| [v, v]).collect();
            doubled.sort();
            prop_assert_eq!(sorted[(24 - 1) / 2], doubled[(48 - 1) / 2]);
            let grid: Vec<u32> = values.iter().flat_map(|&v| std::iter::repeat_n(v, 8)).collect();
            let f = windowed_features(&DailyActivityMatrix::from_grid("h", date(), 8, grid).unwrap());
            prop_assert_eq!(f.row(7)[0], sorted[11] as f64);
        }

        #[test]
        fn normalization_preserves_per_feature_order(
            samples in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 4), 2..20)
        ) {
            let p = fit_lagrangian_vectors(&samples, DEFAULT_EPSILON).unwrap();
            let normed: Vec<Vec<f64>> = samples.iter().map(|s| apply_normalization(s, &p).unwrap()).collect();
            for f in 0..4 {
                for i in 0..samples.len() {
                    for j in 0..samples.len() {
                        if samples[i][f] < samples[j][f] {
                            prop_assert!(normed[i][f] <= normed[j][f]);
                        }
                    }
                }
            }
        }
    }
}
