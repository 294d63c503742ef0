use std::sync::OnceLock;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_range, fill_rows, split_of, uniform_in, LossModel, Sample, Split, TrueCurve};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::grid::Grid;
use crate::matrix::LossMatrix;
use crate::risk::{RiskCurve, RiskKind};
use crate::seed::{substream, SimRng};

/// Per-row loss `s·0.5·e^{−8λ} + h·exp(−(λ−c)²/(2σ²)) + ε`, clipped to
/// `[0, 1]`, on `m` evenly spaced points of `[0, 1]`.
///
/// `s`, `h`, `σ` are uniform on their ranges, `c` is normal and `ε` is a
/// per-row normal offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BumpConfig {
    pub m: usize,
    pub scale: (f64, f64),
    pub height: (f64, f64),
    pub center_mean: f64,
    pub center_sd: f64,
    pub width: (f64, f64),
    pub noise_sd: f64,
    /// Rows in the auxiliary sample behind the reference risk curve.
    pub reference_rows: usize,
}

impl Default for BumpConfig {
    fn default() -> Self {
        BumpConfig {
            m: 100,
            scale: (0.80, 1.20),
            height: (0.06, 0.20),
            center_mean: 0.42,
            center_sd: 0.06,
            width: (0.04, 0.09),
            noise_sd: 0.01,
            reference_rows: 1_000_000,
        }
    }
}

#[derive(Debug)]
pub struct BumpModel {
    config: BumpConfig,
    grid: Grid,
    decay: Vec<f64>,
    center: Normal<f64>,
    noise: Normal<f64>,
    seed: u64,
    reference: OnceLock<Option<TrueCurve>>,
}

const REFERENCE_CHUNK: usize = 10_000;

impl BumpModel {
    pub fn new(config: BumpConfig, seed: u64) -> Result<Self> {
        check_range("scale", config.scale)?;
        check_range("height", config.height)?;
        check_range("width", config.width)?;
        if config.width.0 <= 0.0 {
            return Err(Error::config("bump width must be positive"));
        }
        let center = Normal::new(config.center_mean, config.center_sd)
            .map_err(|e| Error::config(format!("bump center: {e}")))?;
        let noise = Normal::new(0.0, config.noise_sd)
            .map_err(|e| Error::config(format!("bump noise: {e}")))?;
        let grid = Grid::uniform(0.0, 1.0, config.m)?;
        let decay = grid.values().iter().map(|&l| 0.5 * (-8.0 * l).exp()).collect();
        Ok(BumpModel {
            config,
            grid,
            decay,
            center,
            noise,
            seed,
            reference: OnceLock::new(),
        })
    }

    fn fill(&self, rng: &mut SimRng, row: &mut [f64]) {
        let s = uniform_in(rng, self.config.scale);
        let h = uniform_in(rng, self.config.height);
        let c = self.center.sample(rng);
        let w = uniform_in(rng, self.config.width);
        let eps = self.noise.sample(rng);
        let inv = 1.0 / (2.0 * w * w);
        for ((v, &lam), &d) in row.iter_mut().zip(self.grid.values()).zip(&self.decay) {
            let bump = h * (-(lam - c) * (lam - c) * inv).exp();
            *v = (s * d + bump + eps).clamp(0.0, 1.0);
        }
    }

    pub fn matrix(&self, n: usize, rng: &mut SimRng) -> Result<LossMatrix> {
        fill_rows(&self.grid, 1.0, n, rng, |rng, row| self.fill(rng, row))
    }

    fn reference_curve(&self) -> Option<TrueCurve> {
        let total = self.config.reference_rows;
        if total == 0 {
            return None;
        }
        let m = self.grid.len();
        let chunks = total.div_ceil(REFERENCE_CHUNK);
        let partial = map_indexed(Execution::default(), chunks, |c| {
            let rows = REFERENCE_CHUNK.min(total - c * REFERENCE_CHUNK);
            let mut rng = substream(self.seed, "bump-reference", c as u64);
            let mut sums = vec![0.0; m];
            let mut row = vec![0.0; m];
            for _ in 0..rows {
                self.fill(&mut rng, &mut row);
                for (s, v) in sums.iter_mut().zip(&row) {
                    *s += v;
                }
            }
            sums
        });
        let mut sums = vec![0.0; m];
        for p in partial {
            for (s, v) in sums.iter_mut().zip(p) {
                *s += v;
            }
        }
        let values = sums.into_iter().map(|s| s / total as f64).collect();
        Some(TrueCurve {
            curve: RiskCurve::new(self.grid.clone(), values, RiskKind::True).ok()?,
            estimated: true,
        })
    }
}

impl LossModel for BumpModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        split_of(n_cal, n_test, rng, |n, rng| Ok(Sample::plain(self.matrix(n, rng)?)))
    }

    /// Estimated from `reference_rows` auxiliary rows; computed once.
    fn true_risk(&self) -> Option<TrueCurve> {
        self.reference.get_or_init(|| self.reference_curve()).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_without_bump_or_noise() {
        let config = BumpConfig {
            m: 11,
            height: (0.0, 0.0),
            noise_sd: 0.0,
            ..Default::default()
        };
        let model = BumpModel::new(config, 1).unwrap();
        let mtx = model.matrix(50, &mut substream(1, "b", 0)).unwrap();
        for row in mtx.rows() {
            let at_one = row[10];
            let s = at_one / (0.5 * (-8.0f64).exp());
            assert!((0.8..=1.2).contains(&s), "{s}");
            assert!((at_one - s * 0.000_167_7).abs() < 1e-7);
        }
    }

    #[test]
    fn reference_curve_has_interior_bump() {
        let config = BumpConfig {
            m: 101,
            reference_rows: 200_000,
            ..Default::default()
        };
        let model = BumpModel::new(config, 3).unwrap();
        let t = model.true_risk().unwrap();
        assert!(t.estimated);
        let r = t.curve.values();
        assert!(r[42] > r[25], "{} vs {}", r[42], r[25]);
        assert!(r.windows(2).any(|w| w[1] > w[0]));
    }

    #[test]
    fn clipped_to_unit_interval() {
        let config = BumpConfig {
            m: 30,
            noise_sd: 0.5,
            ..Default::default()
        };
        let model = BumpModel::new(config, 1).unwrap();
        let mtx = model.matrix(500, &mut substream(4, "b", 0)).unwrap();
        assert!(mtx.entries().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(mtx.entries().contains(&0.0));
    }
}
