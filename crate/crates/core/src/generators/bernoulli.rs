use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_probability, fill_rows, split_of, LossModel, Sample, Split, TrueCurve};
use crate::error::Result;
use crate::grid::Grid;
use crate::risk::{RiskCurve, RiskKind};
use crate::seed::SimRng;

/// Every entry i.i.d. `Bern(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BernoulliConfig {
    pub m: usize,
    pub p: f64,
}

impl Default for BernoulliConfig {
    fn default() -> Self {
        BernoulliConfig { m: 50, p: 0.3 }
    }
}

#[derive(Debug, Clone)]
pub struct BernoulliModel {
    p: f64,
    grid: Grid,
}

impl BernoulliModel {
    pub fn new(config: BernoulliConfig) -> Result<Self> {
        check_probability("p", config.p)?;
        Ok(BernoulliModel {
            p: config.p,
            grid: Grid::uniform(0.0, 1.0, config.m)?,
        })
    }

    /// Population standard deviation of every column.
    pub fn sigma(&self) -> f64 {
        (self.p * (1.0 - self.p)).sqrt()
    }
}

impl LossModel for BernoulliModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        let p = self.p;
        split_of(n_cal, n_test, rng, |n, rng| {
            Ok(Sample::plain(fill_rows(&self.grid, 1.0, n, rng, |rng, row| {
                for v in row {
                    *v = if rng.random_bool(p) { 1.0 } else { 0.0 };
                }
            })?))
        })
    }

    fn true_risk(&self) -> Option<TrueCurve> {
        Some(TrueCurve {
            curve: RiskCurve::new(self.grid.clone(), vec![self.p; self.grid.len()], RiskKind::True)
                .ok()?,
            estimated: false,
        })
    }
}
