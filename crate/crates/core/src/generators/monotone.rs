use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_probability, check_range, fill_rows, split_of, uniform_in, LossModel, Sample, Split, TrueCurve};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::risk::{RiskCurve, RiskKind};
use crate::seed::SimRng;

/// Rows non-increasing in `λ ∈ [0, 1]` with `L(1) = 0`: a mixture of steps
/// `1{λ < τ}` (`τ ~ U(0, 1)`) and power curves `s·(1 − λ)^e` (`s ~ U(0, 1)`,
/// `e` uniform on `exponent`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonotoneConfig {
    pub m: usize,
    pub step_fraction: f64,
    pub exponent: (f64, f64),
}

impl Default for MonotoneConfig {
    fn default() -> Self {
        MonotoneConfig {
            m: 50,
            step_fraction: 0.5,
            exponent: (0.5, 3.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonotoneModel {
    config: MonotoneConfig,
    grid: Grid,
}

impl MonotoneModel {
    pub fn new(config: MonotoneConfig) -> Result<Self> {
        check_probability("step_fraction", config.step_fraction)?;
        check_range("exponent", config.exponent)?;
        if config.exponent.0 <= 0.0 {
            return Err(Error::config("exponents must be positive"));
        }
        if config.m < 2 {
            return Err(Error::config("monotone generator needs m ≥ 2"));
        }
        let grid = Grid::uniform(0.0, 1.0, config.m)?;
        Ok(MonotoneModel { config, grid })
    }

    fn fill(&self, rng: &mut SimRng, row: &mut [f64]) {
        if rng.random_bool(self.config.step_fraction) {
            let tau: f64 = rng.random();
            for (v, &lam) in row.iter_mut().zip(self.grid.values()) {
                *v = if lam < tau { 1.0 } else { 0.0 };
            }
        } else {
            let s: f64 = rng.random();
            let e = uniform_in(rng, self.config.exponent);
            for (v, &lam) in row.iter_mut().zip(self.grid.values()) {
                *v = s * (1.0 - lam).powf(e);
            }
        }
    }

    /// `E[(1 − λ)^e]` for `e` uniform on the exponent range.
    fn power_mean(&self, x: f64) -> f64 {
        let (a, b) = self.config.exponent;
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else if b == a {
            x.powf(a)
        } else {
            (x.powf(b) - x.powf(a)) / ((b - a) * x.ln())
        }
    }
}

impl LossModel for MonotoneModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        split_of(n_cal, n_test, rng, |n, rng| {
            Ok(Sample::plain(fill_rows(&self.grid, 1.0, n, rng, |rng, row| {
                self.fill(rng, row)
            })?))
        })
    }

    fn true_risk(&self) -> Option<TrueCurve> {
        let f = self.config.step_fraction;
        let values = self
            .grid
            .values()
            .iter()
            .map(|&lam| f * (1.0 - lam) + (1.0 - f) * 0.5 * self.power_mean(1.0 - lam))
            .collect();
        Some(TrueCurve {
            curve: RiskCurve::new(self.grid.clone(), values, RiskKind::True).ok()?,
            estimated: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::loss_monotonize;
    use crate::seed::substream;

    #[test]
    fn rows_are_monotone_and_end_at_zero() {
        let model = MonotoneModel::new(MonotoneConfig::default()).unwrap();
        let s = model.draw(500, &mut substream(1, "mono", 0)).unwrap();
        for row in s.losses.rows() {
            assert!(row.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(*row.last().unwrap(), 0.0);
        }
        assert_eq!(loss_monotonize(&s.losses), s.losses);
    }

    #[test]
    fn true_curve_matches_sample_means() {
        let model = MonotoneModel::new(MonotoneConfig {
            m: 11,
            ..Default::default()
        })
        .unwrap();
        let n = 200_000;
        let s = model.draw(n, &mut substream(2, "mono", 0)).unwrap();
        let truth = model.true_risk().unwrap();
        for j in 0..11 {
            let diff = (s.mean_loss(j) - truth.curve.value(j)).abs();
            assert!(diff < 4.0 * 0.5 / (n as f64).sqrt(), "{j}: {diff}");
        }
        assert_eq!(truth.curve.value(10), 0.0);
        assert!((truth.curve.value(0) - 0.75).abs() < 1e-15);
    }
}
