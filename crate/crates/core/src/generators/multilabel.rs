use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{split_of, LossModel, Sample, Split};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::LossMatrix;
use crate::seed::{substream, SimRng};

/// Logistic multilabel model with noisy predicted probabilities.
///
/// Labels follow `P(Y_k = 1 | X) = σ(Xᵀ W_k + b_k)` with `X ~ N(0, I)`.
/// Predictions add Gaussian noise to the logits. The prediction set is
/// `C(X; λ) = {k : p̂_k ≥ 1 − λ}` and the loss is [`precision_loss`] of the
/// set's precision, with an empty set counted as precision 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultilabelConfig {
    pub m: usize,
    pub features: usize,
    pub labels: usize,
    pub weight_sd: f64,
    pub bias_sd: f64,
    pub logit_noise_sd: f64,
    pub amplitude: f64,
}

impl Default for MultilabelConfig {
    fn default() -> Self {
        MultilabelConfig {
            m: 100,
            features: 15,
            labels: 10,
            weight_sd: 0.8,
            bias_sd: 0.2,
            logit_noise_sd: 1.0,
            amplitude: 0.22,
        }
    }
}

/// `ℓ(x) = 1 − x + a·sin(2πx)(1 − x)`, clipped to `[0, 1]`.
pub fn precision_loss(x: f64, amplitude: f64) -> f64 {
    (1.0 - x + amplitude * (2.0 * PI * x).sin() * (1.0 - x)).clamp(0.0, 1.0)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// The predictor weights are drawn once from the model seed and shared by
/// every draw.
#[derive(Debug, Clone)]
pub struct MultilabelModel {
    config: MultilabelConfig,
    grid: Grid,
    /// `labels × features`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl MultilabelModel {
    pub fn new(config: MultilabelConfig, seed: u64) -> Result<Self> {
        if config.features == 0 || config.labels == 0 {
            return Err(Error::config("multilabel needs at least one feature and label"));
        }
        for (name, v) in [
            ("weight_sd", config.weight_sd),
            ("bias_sd", config.bias_sd),
            ("logit_noise_sd", config.logit_noise_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} = {v} must be non-negative")));
            }
        }
        let grid = Grid::uniform(0.0, 1.0, config.m)?;
        let mut rng = substream(seed, "multilabel-predictor", 0);
        let mut normal = |sd: f64| { let z: f64 = StandardNormal.sample(&mut rng); sd * z };
        let weights = (0..config.labels * config.features)
            .map(|_| normal(config.weight_sd))
            .collect();
        let bias = (0..config.labels).map(|_| normal(config.bias_sd)).collect();
        Ok(MultilabelModel {
            config,
            grid,
            weights,
            bias,
        })
    }

    /// Losses and set sizes for `n` fresh samples.
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<Sample> {
        if n == 0 {
            return Err(Error::config("cannot draw zero rows"));
        }
        let (d, k, m) = (self.config.features, self.config.labels, self.grid.len());
        let mut losses = Vec::with_capacity(n * m);
        let mut sizes = Vec::with_capacity(n * m);
        let mut x = vec![0.0; d];
        let mut scored: Vec<(f64, bool)> = Vec::with_capacity(k);
        for _ in 0..n {
            for v in &mut x {
                *v = StandardNormal.sample(rng);
            }
            scored.clear();
            for label in 0..k {
                let w = &self.weights[label * d..(label + 1) * d];
                let z = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + self.bias[label];
                let y = rng.random_bool(sigmoid(z));
                let noise: f64 = StandardNormal.sample(rng);
                scored.push((sigmoid(z + self.config.logit_noise_sd * noise), y));
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));

            let (mut size, mut hits) = (0usize, 0usize);
            for &lam in self.grid.values() {
                let threshold = 1.0 - lam;
                while size < k && scored[size].0 >= threshold {
                    hits += usize::from(scored[size].1);
                    size += 1;
                }
                let precision = if size == 0 {
                    0.0
                } else {
                    hits as f64 / size as f64
                };
                losses.push(precision_loss(precision, self.config.amplitude));
                sizes.push(size as f64);
            }
        }
        Ok(Sample {
            losses: LossMatrix::from_flat(self.grid.clone(), 1.0, losses)?,
            set_sizes: Some(sizes),
            weights: None,
        })
    }
}

impl LossModel for MultilabelModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        split_of(n_cal, n_test, rng, |n, rng| self.sample(n, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_formula() {
        assert!(precision_loss(1.0, 0.22).abs() < 1e-15);
        assert_eq!(precision_loss(0.0, 0.22), 1.0);
        assert!((precision_loss(0.25, 0.22) - 0.915).abs() < 1e-12);
        assert_eq!(precision_loss(0.1, 0.22), 1.0);
    }

    #[test]
    fn endpoints_of_the_grid() {
        let model = MultilabelModel::new(
            MultilabelConfig {
                m: 11,
                ..Default::default()
            },
            9,
        )
        .unwrap();
        let s = model.sample(200, &mut substream(1, "ml", 0)).unwrap();
        let sizes = s.set_sizes.as_ref().unwrap();
        for (i, row) in s.losses.rows().enumerate() {
            assert_eq!(row[0], 1.0);
            assert_eq!(sizes[i * 11], 0.0);
            assert_eq!(sizes[i * 11 + 10], 10.0);
            let row_sizes = &sizes[i * 11..(i + 1) * 11];
            assert!(row_sizes.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn noiseless_oracle_agreement() {
        // With no logit noise the scores equal the label probabilities, so
        // recompute one row by brute force from the same RNG stream.
        let config = MultilabelConfig {
            m: 7,
            features: 3,
            labels: 4,
            logit_noise_sd: 0.0,
            ..Default::default()
        };
        let model = MultilabelModel::new(config.clone(), 2).unwrap();
        let s = model.sample(1, &mut substream(3, "ml", 0)).unwrap();

        let mut rng = substream(3, "ml", 0);
        let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut probs = vec![];
        let mut ys = vec![];
        for k in 0..4 {
            let z: f64 = (0..3).map(|f| model.weights[k * 3 + f] * x[f]).sum::<f64>()
                + model.bias[k];
            ys.push(rng.random_bool(sigmoid(z)));
            let _: f64 = StandardNormal.sample(&mut rng);
            probs.push(sigmoid(z));
        }
        for (j, &lam) in model.grid.values().iter().enumerate() {
            let set: Vec<usize> = (0..4).filter(|&k| probs[k] >= 1.0 - lam).collect();
            let prec = if set.is_empty() {
                0.0
            } else {
                set.iter().filter(|&&k| ys[k]).count() as f64 / set.len() as f64
            };
            assert_eq!(s.losses.get(0, j), precision_loss(prec, 0.22));
        }
    }
}
