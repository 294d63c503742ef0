use rand::Rng;

use super::{fill_rows, split_of, LossModel, Sample, Split, TrueCurve};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::LossMatrix;
use crate::risk::{crc_condition, RiskCurve, RiskKind};
use crate::seed::SimRng;
use crate::stats::binomial_cdf;

/// Grid `{0, 1/m, …, 1}`. Every column but the last is i.i.d. `Bern(p)`;
/// the last is identically 0.
#[derive(Debug, Clone)]
pub struct CounterexampleModel {
    m: usize,
    p: f64,
    grid: Grid,
}

impl CounterexampleModel {
    pub fn new(m: usize, p: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("counterexample needs m ≥ 1"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::config(format!("counterexample p = {p} outside (0, 1)")));
        }
        let grid = Grid::new((0..=m).map(|j| j as f64 / m as f64).collect())?;
        Ok(CounterexampleModel { m, p, grid })
    }

    pub fn matrix(&self, n: usize, rng: &mut SimRng) -> Result<LossMatrix> {
        let (m, p) = (self.m, self.p);
        fill_rows(&self.grid, 1.0, n, rng, |rng, row| {
            for v in &mut row[..m] {
                *v = if rng.random_bool(p) { 1.0 } else { 0.0 };
            }
        })
    }

    /// `n` calibration rows plus one test row.
    pub fn trial(&self, n: usize, rng: &mut SimRng) -> Result<LossMatrix> {
        self.matrix(n + 1, rng)
    }
}

impl LossModel for CounterexampleModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        split_of(n_cal, n_test, rng, |n, rng| Ok(Sample::plain(self.matrix(n, rng)?)))
    }

    fn true_risk(&self) -> Option<TrueCurve> {
        let mut values = vec![self.p; self.m];
        values.push(0.0);
        Some(TrueCurve {
            curve: RiskCurve::new(self.grid.clone(), values, RiskKind::True).ok()?,
            estimated: false,
        })
    }
}

/// Exact expected test loss of CRC on the counterexample:
/// `p·(1 − (1 − q)^m)` where `q` is the probability that one `Bern(p)`
/// column passes the CRC condition with `n` samples and `B = 1`.
///
/// `q = P(S ≤ s*)` for `S ~ Bin(n, p)`, with `s*` the largest count that
/// passes [`crc_condition`] itself, so the threshold agrees with the scan on
/// every floating-point edge.
pub fn counterexample_analytic_risk(n: usize, m: usize, p: f64, alpha: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::config("counterexample needs n, m ≥ 1"));
    }
    let lo = 1.0 / (n as f64 + 1.0);
    if !(lo < alpha && alpha < p && p < 1.0) {
        return Err(Error::config(format!(
            "counterexample needs 1/(n+1) < alpha < p < 1, got alpha = {alpha}, p = {p}, n = {n}"
        )));
    }
    let passing = (0..=n).take_while(|&s| crc_condition(s as f64 / n as f64, n, 1.0, alpha));
    let q = match passing.last() {
        Some(s_max) => binomial_cdf(n as u64, p, s_max as i64),
        None => 0.0,
    };
    let none_pass = (m as f64 * (-q).ln_1p()).exp();
    Ok(p * (1.0 - none_pass))
}
