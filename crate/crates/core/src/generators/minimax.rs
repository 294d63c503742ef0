use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fill_rows, split_of, LossModel, Sample, Split, TrueCurve};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::LossMatrix;
use crate::risk::{RiskCurve, RiskKind};
use crate::seed::SimRng;

/// Hard instance: independent binary columns, `Bern(alpha)` at one hidden
/// column and `Bern(alpha + delta)` everywhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimaxConfig {
    pub m: usize,
    /// Loss rate of the hidden column.
    pub alpha: f64,
    /// Gap to the other columns. Defaults to `0.5·√(ln m / n)` for the
    /// calibration size `n`, capped so that `alpha + delta ≤ 0.95`.
    pub delta: Option<f64>,
    /// Fixed hidden column; `None` redraws it uniformly for every split.
    pub hidden: Option<usize>,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        MinimaxConfig {
            m: 64,
            alpha: 0.1,
            delta: None,
            hidden: None,
        }
    }
}

impl MinimaxConfig {
    pub fn resolved_delta(&self, n: usize) -> f64 {
        self.delta.unwrap_or_else(|| {
            let d = 0.5 * ((self.m as f64).ln() / n as f64).sqrt();
            d.min(0.95 - self.alpha).max(0.0)
        })
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxModel {
    config: MinimaxConfig,
    grid: Grid,
}

impl MinimaxModel {
    pub fn new(config: MinimaxConfig) -> Result<Self> {
        if !(config.alpha > 0.0 && config.alpha < 0.95) {
            return Err(Error::config(format!("minimax alpha = {} outside (0, 0.95)", config.alpha)));
        }
        if let Some(d) = config.delta {
            if !(d >= 0.0 && config.alpha + d < 1.0) {
                return Err(Error::config(format!(
                    "minimax needs delta ≥ 0 and alpha + delta < 1, got delta = {d}"
                )));
            }
        }
        if let Some(j) = config.hidden {
            if j >= config.m {
                return Err(Error::config(format!("hidden column {j} out of range")));
            }
        }
        let grid = Grid::uniform(0.0, 1.0, config.m)?;
        Ok(MinimaxModel { config, grid })
    }

    pub fn config(&self) -> &MinimaxConfig {
        &self.config
    }

    pub fn matrix(&self, n: usize, hidden: usize, delta: f64, rng: &mut SimRng) -> Result<LossMatrix> {
        let (lo, hi) = (self.config.alpha, self.config.alpha + delta);
        fill_rows(&self.grid, 1.0, n, rng, |rng, row| {
            for (j, v) in row.iter_mut().enumerate() {
                let p = if j == hidden { lo } else { hi };
                *v = if rng.random_bool(p) { 1.0 } else { 0.0 };
            }
        })
    }

    fn hidden(&self, rng: &mut SimRng) -> usize {
        self.config
            .hidden
            .unwrap_or_else(|| rng.random_range(0..self.config.m))
    }

    /// `n` calibration rows plus one test row.
    pub fn trial(&self, n: usize, rng: &mut SimRng) -> Result<LossMatrix> {
        let hidden = self.hidden(rng);
        self.matrix(n + 1, hidden, self.config.resolved_delta(n), rng)
    }

    /// The population curve for a given hidden column and gap.
    pub fn curve(&self, hidden: usize, delta: f64) -> Result<RiskCurve> {
        let values = (0..self.config.m)
            .map(|j| self.config.alpha + if j == hidden { 0.0 } else { delta })
            .collect();
        RiskCurve::new(self.grid.clone(), values, RiskKind::True)
    }
}

impl LossModel for MinimaxModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        let hidden = self.hidden(rng);
        let delta = self.config.resolved_delta(n_cal);
        split_of(n_cal, n_test, rng, |n, rng| {
            Ok(Sample::plain(self.matrix(n, hidden, delta, rng)?))
        })
    }

    fn true_risk(&self) -> Option<TrueCurve> {
        let curve = self.curve(self.config.hidden?, self.config.delta?).ok()?;
        Some(TrueCurve {
            curve,
            estimated: false,
        })
    }
}
