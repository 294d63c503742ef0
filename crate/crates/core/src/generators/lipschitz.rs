use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fill_rows, split_of, LossModel, Sample, Split, TrueCurve};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::risk::{RiskCurve, RiskKind};
use crate::seed::SimRng;

/// `K`-Lipschitz rows around a V-shaped risk with its minimum `alpha − epsilon`
/// at grid point `star_index`.
///
/// The population risk is `R(λ) = min(0.95, α − ε + (K/2)|λ − λ*|)` and each
/// row is `R ± R(1 − R)` with a fair random sign, so `E[L] = R`, `L ∈ [0, 1]`
/// and the map `R ↦ L` is 2-Lipschitz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LipschitzConfig {
    pub m: usize,
    pub k: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub star_index: usize,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        LipschitzConfig {
            m: 21,
            k: 8.0,
            alpha: 0.2,
            epsilon: 0.02,
            star_index: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LipschitzModel {
    config: LipschitzConfig,
    grid: Grid,
    risk: Vec<f64>,
}

impl LipschitzModel {
    pub fn new(config: LipschitzConfig) -> Result<Self> {
        let floor = config.alpha - config.epsilon;
        if !(config.epsilon > 0.0 && floor > 0.0 && config.alpha < 0.95) {
            return Err(Error::config(format!(
                "lipschitz needs 0 < epsilon < alpha < 0.95, got alpha = {}, epsilon = {}",
                config.alpha, config.epsilon
            )));
        }
        if !(config.k > 0.0 && config.k.is_finite()) {
            return Err(Error::config("Lipschitz constant must be positive"));
        }
        if config.star_index >= config.m {
            return Err(Error::config("star_index outside the grid"));
        }
        let grid = Grid::uniform(0.0, 1.0, config.m)?;
        let star = grid.value(config.star_index);
        let risk = grid
            .values()
            .iter()
            .map(|&l| (floor + config.k / 2.0 * (l - star).abs()).min(0.95))
            .collect();
        Ok(LipschitzModel { config, grid, risk })
    }

    pub fn config(&self) -> &LipschitzConfig {
        &self.config
    }
}

impl LossModel for LipschitzModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        split_of(n_cal, n_test, rng, |n, rng| {
            let losses = fill_rows(&self.grid, 1.0, n, rng, |rng, row| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                for (v, &r) in row.iter_mut().zip(&self.risk) {
                    *v = r + sign * r * (1.0 - r);
                }
            })?;
            Ok(Sample::plain(losses))
        })
    }

    fn true_risk(&self) -> Option<TrueCurve> {
        Some(TrueCurve {
            curve: RiskCurve::new(self.grid.clone(), self.risk.clone(), RiskKind::True).ok()?,
            estimated: false,
        })
    }
}
