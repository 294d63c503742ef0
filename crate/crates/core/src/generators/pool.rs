use rand::seq::index;

use super::{LossModel, Sample, Split};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::seed::SimRng;

/// A fixed sample split into random disjoint calibration and test parts on
/// every draw.
#[derive(Debug, Clone)]
pub struct PoolModel {
    pool: Sample,
}

impl PoolModel {
    pub fn new(pool: Sample) -> Self {
        PoolModel { pool }
    }

    pub fn pool(&self) -> &Sample {
        &self.pool
    }
}

impl LossModel for PoolModel {
    fn grid(&self) -> &Grid {
        self.pool.losses.grid()
    }

    fn bound(&self) -> f64 {
        self.pool.losses.bound()
    }

    fn weight_cap(&self) -> Option<f64> {
        self.pool
            .weights
            .as_ref()
            .map(|w| w.iter().copied().fold(0.0, f64::max))
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        let total = self.pool.n_rows();
        let n_test = n_test.max(1);
        if n_cal == 0 || n_cal + n_test > total {
            return Err(Error::config(format!(
                "cannot split {n_cal} + {n_test} rows from a pool of {total}"
            )));
        }
        let picked = index::sample(rng, total, n_cal + n_test).into_vec();
        Ok(Split {
            calibration: self.pool.select_rows(&picked[..n_cal])?,
            test: self.pool.select_rows(&picked[n_cal..])?,
        })
    }
}
