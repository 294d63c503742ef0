use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_probability, LossModel, Sample, Split, TrueCurve};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::LossMatrix;
use crate::risk::{RiskCurve, RiskKind};
use crate::seed::SimRng;

/// Two-group covariate shift. A binary covariate `x` has `P(x = 1)` equal to
/// `train_p1` on calibration rows and `test_p1` on test rows. Column `j` is
/// `Bern(column_loss[j][x])`. Calibration rows carry the likelihood ratio
/// `w(x) = P_test(x) / P_train(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftConfig {
    pub train_p1: f64,
    pub test_p1: f64,
    pub column_loss: Vec<[f64; 2]>,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            train_p1: 0.5,
            test_p1: 0.8,
            column_loss: vec![[0.05, 0.35], [0.1, 0.1]],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShiftModel {
    config: ShiftConfig,
    grid: Grid,
    ratio: [f64; 2],
}

impl ShiftModel {
    pub fn new(config: ShiftConfig) -> Result<Self> {
        for (name, p) in [("train_p1", config.train_p1), ("test_p1", config.test_p1)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(format!("{name} = {p} outside (0, 1)")));
            }
        }
        for pair in &config.column_loss {
            check_probability("column loss", pair[0])?;
            check_probability("column loss", pair[1])?;
        }
        let grid = Grid::uniform(0.0, 1.0, config.column_loss.len())?;
        let ratio = [
            (1.0 - config.test_p1) / (1.0 - config.train_p1),
            config.test_p1 / config.train_p1,
        ];
        Ok(ShiftModel {
            config,
            grid,
            ratio,
        })
    }

    fn sample(&self, n: usize, p1: f64, weighted: bool, rng: &mut SimRng) -> Result<Sample> {
        if n == 0 {
            return Err(Error::config("cannot draw zero rows"));
        }
        let m = self.grid.len();
        let mut entries = Vec::with_capacity(n * m);
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let x = usize::from(rng.random_bool(p1));
            weights.push(self.ratio[x]);
            for pair in &self.config.column_loss {
                entries.push(if rng.random_bool(pair[x]) { 1.0 } else { 0.0 });
            }
        }
        Ok(Sample {
            losses: LossMatrix::from_flat(self.grid.clone(), 1.0, entries)?,
            set_sizes: None,
            weights: weighted.then_some(weights),
        })
    }

    fn curve_at(&self, p1: f64) -> Vec<f64> {
        self.config
            .column_loss
            .iter()
            .map(|pair| (1.0 - p1) * pair[0] + p1 * pair[1])
            .collect()
    }

    /// Column risks under the calibration distribution.
    pub fn train_risk(&self) -> Vec<f64> {
        self.curve_at(self.config.train_p1)
    }
}

impl LossModel for ShiftModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn weight_cap(&self) -> Option<f64> {
        Some(self.ratio[0].max(self.ratio[1]))
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        let calibration = self.sample(n_cal, self.config.train_p1, true, rng)?;
        let test = self.sample(n_test.max(1), self.config.test_p1, false, rng)?;
        Ok(Split { calibration, test })
    }

    /// Risk under the test distribution.
    fn true_risk(&self) -> Option<TrueCurve> {
        Some(TrueCurve {
            curve: RiskCurve::new(self.grid.clone(), self.curve_at(self.config.test_p1), RiskKind::True)
                .ok()?,
            estimated: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::substream;

    #[test]
    fn weights_and_risks() {
        let model = ShiftModel::new(ShiftConfig::default()).unwrap();
        assert_eq!(model.weight_cap(), Some(1.6));
        let train = model.train_risk();
        assert!((train[0] - 0.2).abs() < 1e-15);
        let test = model.true_risk().unwrap();
        assert!((test.curve.value(0) - 0.29).abs() < 1e-15);

        let split = model.draw_split(20_000, 10, &mut substream(1, "shift", 0)).unwrap();
        let w = split.calibration.weights.as_ref().unwrap();
        assert!(w.iter().all(|&v| (v - 0.4).abs() < 1e-15 || v == 1.6));
        let mean_w = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean_w - 1.0).abs() < 0.03);
        let weighted: f64 = split
            .calibration
            .losses
            .column(0)
            .zip(w)
            .map(|(l, w)| l * w)
            .sum::<f64>()
            / 20_000.0;
        assert!((weighted - 0.29).abs() < 0.02);
        assert!(split.test.weights.is_none());
    }
}
