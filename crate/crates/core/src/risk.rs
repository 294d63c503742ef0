//! Risk curves, grid scans and monotonization.
//!
//! A scan returns the smallest grid index whose value satisfies a threshold
//! condition (`≤`, taken literally, no tolerance). When no index qualifies,
//! the last grid point is returned with `feasible = false`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::LossMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskKind {
    Empirical,
    True,
    LossMonotonized,
    RiskMonotonized,
    WeightedEmpirical,
}

impl RiskKind {
    fn is_monotonized(self) -> bool {
        matches!(self, RiskKind::LossMonotonized | RiskKind::RiskMonotonized)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    grid: Grid,
    values: Vec<f64>,
    kind: RiskKind,
}

impl RiskCurve {
    pub fn new(grid: Grid, values: Vec<f64>, kind: RiskKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "risk curve has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if kind.is_monotonized() && values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("monotonized risk curve must be non-increasing"));
        }
        Ok(RiskCurve { grid, values, kind })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> RiskKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// The outcome of a grid scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub lambda: f64,
    /// The level the scan actually thresholded against.
    pub effective_level: f64,
    /// False when nothing qualified and the last grid point was taken.
    pub feasible: bool,
}

impl Selection {
    fn at(grid: &Grid, found: Option<usize>, effective_level: f64) -> Self {
        let index = found.unwrap_or_else(|| grid.last_index());
        Selection {
            index,
            lambda: grid.value(index),
            effective_level,
            feasible: found.is_some(),
        }
    }
}

/// Column means `R̂_n(λ_j)`.
pub fn empirical_risk(matrix: &LossMatrix) -> RiskCurve {
    let mut sums = vec![0.0; matrix.n_cols()];
    for row in matrix.rows() {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = matrix.n_rows() as f64;
    let values = sums.into_iter().map(|s| s / n).collect();
    RiskCurve {
        grid: matrix.grid().clone(),
        values,
        kind: RiskKind::Empirical,
    }
}

/// `(1/n) Σ w_i L_i(λ_j)`. Uses the same accumulation order as
/// [`empirical_risk`], so unit weights reproduce it bit for bit.
pub fn weighted_empirical_risk(matrix: &LossMatrix, weights: &[f64]) -> Result<RiskCurve> {
    if weights.len() != matrix.n_rows() {
        return Err(Error::invalid(format!(
            "{} weights for {} rows",
            weights.len(),
            matrix.n_rows()
        )));
    }
    let mut sums = vec![0.0; matrix.n_cols()];
    for (row, &w) in matrix.rows().zip(weights) {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += w * v;
        }
    }
    let n = matrix.n_rows() as f64;
    Ok(RiskCurve {
        grid: matrix.grid().clone(),
        values: sums.into_iter().map(|s| s / n).collect(),
        kind: RiskKind::WeightedEmpirical,
    })
}

/// The conformal calibration condition `(n/(n+1))·r + B/(n+1) ≤ level`.
///
/// Shared by every code path that needs to agree with [`crc_scan`] bit for
/// bit (including the analytic counterexample risk).
#[inline]
pub fn crc_condition(risk: f64, n: usize, bound: f64, level: f64) -> bool {
    let n = n as f64;
    n / (n + 1.0) * risk + bound / (n + 1.0) <= level
}

/// Smallest index `j` with `(n/(n+1))·values[j] + bound/(n+1) ≤ level`.
///
/// Any curve kind may be scanned. A non-positive `level` is allowed and
/// simply yields an infeasible selection.
pub fn crc_scan(curve: &RiskCurve, n: usize, bound: f64, level: f64) -> Selection {
    let found = curve
        .values
        .iter()
        .position(|&r| crc_condition(r, n, bound, level));
    Selection::at(&curve.grid, found, level)
}

/// Smallest index with `values[j] ≤ level`.
pub fn plain_scan(curve: &RiskCurve, level: f64) -> Selection {
    let found = curve.values.iter().position(|&r| r <= level);
    Selection::at(&curve.grid, found, level)
}

/// Grid-restricted oracle threshold: [`plain_scan`] on a true risk curve.
pub fn grid_oracle(true_curve: &RiskCurve, level: f64) -> Result<Selection> {
    if true_curve.kind != RiskKind::True {
        return Err(Error::invalid(format!(
            "grid oracle needs a true risk curve, got {:?}",
            true_curve.kind
        )));
    }
    Ok(plain_scan(true_curve, level))
}

/// Running maximum from the right, in place.
fn suffix_max_in_place(values: &mut [f64]) {
    let mut running = f64::NEG_INFINITY;
    for v in values.iter_mut().rev() {
        running = running.max(*v);
        *v = running;
    }
}

/// Replace each row by its suffix supremum `sup_{t ≥ λ} L_i(t)`.
pub fn loss_monotonize(matrix: &LossMatrix) -> LossMatrix {
    let m = matrix.n_cols();
    let mut entries = matrix.entries().to_vec();
    for row in entries.chunks_exact_mut(m) {
        suffix_max_in_place(row);
    }
    LossMatrix::from_parts(matrix.grid().clone(), matrix.bound(), matrix.n_rows(), entries)
}

/// Suffix supremum of a risk curve, `sup_{t ≥ λ} R(t)`.
pub fn risk_monotonize(curve: &RiskCurve) -> RiskCurve {
    let mut values = curve.values.clone();
    suffix_max_in_place(&mut values);
    RiskCurve {
        grid: curve.grid.clone(),
        values,
        kind: RiskKind::RiskMonotonized,
    }
}

/// Column means of the loss-monotonized matrix, `R̃_n`.
pub fn loss_monotonized_risk(matrix: &LossMatrix) -> RiskCurve {
    let mut curve = empirical_risk(&loss_monotonize(matrix));
    // Floating-point addition is monotone, so the column sums of
    // non-increasing rows are non-increasing as well.
    debug_assert!(curve.values.windows(2).all(|w| w[1] <= w[0]));
    curve.kind = RiskKind::LossMonotonized;
    curve
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> Grid {
        Grid::uniform(0.0, 1.0, m).unwrap()
    }

    fn curve(values: &[f64]) -> RiskCurve {
        RiskCurve::new(grid(values.len()), values.to_vec(), RiskKind::Empirical).unwrap()
    }

    fn matrix(rows: &[&[f64]]) -> LossMatrix {
        LossMatrix::from_rows(grid(rows[0].len()), 1.0, rows.iter().map(|r| r.to_vec()).collect())
            .unwrap()
    }

    // Brute-force reference definitions.
    fn column_means_oracle(rows: &[&[f64]]) -> Vec<f64> {
        let m = rows[0].len();
        (0..m)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
            .collect()
    }

    fn suffix_sup_oracle(v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|j| v[j..].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    fn scan_oracle(v: &[f64], pass: impl Fn(f64) -> bool) -> (usize, bool) {
        for (j, &x) in v.iter().enumerate() {
            if pass(x) {
                return (j, true);
            }
        }
        (v.len() - 1, false)
    }

    #[test]
    fn empirical_risk_examples() {
        assert_eq!(empirical_risk(&matrix(&[&[0.2, 0.4, 0.0]])).values(), &[0.2, 0.4, 0.0]);

        let rows: &[&[f64]] = &[&[0.1, 0.4, 0.0], &[0.2, 0.1, 0.3]];
        let got = empirical_risk(&matrix(rows));
        let want = column_means_oracle(rows);
        assert_eq!(got.values(), want.as_slice());
        for (g, w) in got.values().iter().zip([0.15, 0.25, 0.15]) {
            assert!((g - w).abs() < 1e-15);
        }
        assert_eq!(got.kind(), RiskKind::Empirical);

        let zeros = LossMatrix::from_flat(grid(4), 1.0, vec![0.0; 20]).unwrap();
        assert_eq!(empirical_risk(&zeros).values(), &[0.0; 4]);
    }

    #[test]
    fn crc_scan_examples() {
        let s = crc_scan(&curve(&[0.0, 0.0, 0.0]), 10, 1.0, 0.1);
        assert_eq!((s.index, s.feasible), (0, true));

        let s = crc_scan(&curve(&[1.0, 1.0, 1.0]), 10, 1.0, 0.1);
        assert_eq!((s.index, s.feasible, s.lambda), (2, false, 1.0));

        let v = [0.5, 0.05, 0.3, 0.02];
        let s = crc_scan(&curve(&v), 99, 1.0, 0.1);
        let (j, f) = scan_oracle(&v, |r| 99.0 / 100.0 * r + 1.0 / 100.0 <= 0.1);
        assert_eq!((s.index, s.feasible), (j, f));
        assert_eq!(s.index, 1);
        assert_eq!(s.effective_level, 0.1);
    }

    #[test]
    fn crc_scan_equality_is_feasible() {
        // n = 1, B = 1: condition is r/2 + 1/2 ≤ level; r = 0 at level 0.5 is exact.
        let s = crc_scan(&curve(&[0.0]), 1, 1.0, 0.5);
        assert!(s.feasible);
    }

    #[test]
    fn crc_scan_zero_bound_is_plain_scan() {
        let c = curve(&[0.3, 0.12, 0.09, 0.2]);
        assert_eq!(crc_scan(&c, 1_000_000, 0.0, 0.1).index, plain_scan(&c, 0.1).index);
    }

    #[test]
    fn plain_scan_examples() {
        let s = plain_scan(&curve(&[0.3, 0.09, 0.2]), 0.1);
        assert_eq!((s.index, s.feasible), (1, true));
        let s = plain_scan(&curve(&[0.3, 0.3, 0.3]), 0.1);
        assert_eq!((s.index, s.feasible), (2, false));
        let s = plain_scan(&curve(&[0.05, 0.2]), 0.1);
        assert_eq!((s.index, s.feasible), (0, true));
    }

    #[test]
    fn monotonize_examples() {
        let m = loss_monotonize(&matrix(&[&[0.1, 0.4, 0.0], &[0.5, 0.3, 0.1], &[0.2, 0.2, 0.2]]));
        assert_eq!(m.row(0), suffix_sup_oracle(&[0.1, 0.4, 0.0]).as_slice());
        assert_eq!(m.row(0), &[0.4, 0.4, 0.0]);
        assert_eq!(m.row(1), &[0.5, 0.3, 0.1]);
        assert_eq!(m.row(2), &[0.2, 0.2, 0.2]);

        let r = risk_monotonize(&curve(&[0.5, 0.2, 0.3, 0.1]));
        assert_eq!(r.values(), &[0.5, 0.3, 0.3, 0.1]);
        assert_eq!(r.kind(), RiskKind::RiskMonotonized);
        let r = risk_monotonize(&curve(&[0.15, 0.25, 0.15]));
        assert_eq!(r.values(), &[0.25, 0.25, 0.15]);
        let r = risk_monotonize(&curve(&[0.4, 0.3, 0.3]));
        assert_eq!(r.values(), &[0.4, 0.3, 0.3]);
    }

    #[test]
    fn grid_oracle_examples() {
        let t = RiskCurve::new(grid(3), vec![0.3, 0.15, 0.05], RiskKind::True).unwrap();
        assert_eq!(grid_oracle(&t, 0.1).unwrap().index, 2);
        assert_eq!(grid_oracle(&t, 0.5).unwrap().index, 0);
        let s = grid_oracle(&t, 0.01).unwrap();
        assert_eq!((s.index, s.feasible), (2, false));
        assert!(grid_oracle(&curve(&[0.1, 0.2, 0.3]), 0.1).is_err());
    }

    #[test]
    fn monotonized_kinds_are_checked() {
        assert!(RiskCurve::new(grid(2), vec![0.1, 0.2], RiskKind::RiskMonotonized).is_err());
        assert!(RiskCurve::new(grid(2), vec![0.1], RiskKind::Empirical).is_err());
    }

    #[test]
    fn weighted_unit_weights_match() {
        let rows: &[&[f64]] = &[&[0.1, 0.4, 0.0], &[0.2, 0.1, 0.3], &[0.7, 0.3, 0.1]];
        let m = matrix(rows);
        let w = weighted_empirical_risk(&m, &[1.0; 3]).unwrap();
        assert_eq!(w.values(), empirical_risk(&m).values());
        assert!(weighted_empirical_risk(&m, &[1.0; 2]).is_err());
    }
}
