use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// An `n × m` array of bounded losses `L_i(λ_j)` over a grid, stored
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    grid: Grid,
    bound: f64,
    rows: usize,
    entries: Vec<f64>,
}

impl LossMatrix {
    /// Build from row-major entries. Every entry must lie in `[0, bound]`;
    /// out-of-range values are rejected, never clipped.
    pub fn from_flat(grid: Grid, bound: f64, entries: Vec<f64>) -> Result<Self> {
        if bound.is_nan() || bound <= 0.0 || !bound.is_finite() {
            return Err(Error::invalid(format!("loss bound must be positive, got {bound}")));
        }
        let m = grid.len();
        if entries.is_empty() {
            return Err(Error::invalid("loss matrix has no rows"));
        }
        if entries.len() % m != 0 {
            return Err(Error::invalid(format!(
                "{} entries do not fill rows of width {m}",
                entries.len()
            )));
        }
        if let Some(k) = entries.iter().position(|&v| !(0.0..=bound).contains(&v)) {
            return Err(Error::LossOutOfRange {
                row: k / m,
                column: k % m,
                value: entries[k],
                bound,
            });
        }
        Ok(LossMatrix {
            rows: entries.len() / m,
            grid,
            bound,
            entries,
        })
    }

    pub fn from_rows(grid: Grid, bound: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = grid.len();
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, grid has {m}",
                rows[i].len()
            )));
        }
        LossMatrix::from_flat(grid, bound, rows.into_iter().flatten().collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Number of samples `n`.
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    /// Grid size `m`.
    pub fn n_cols(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n_cols() + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_cols();
        &self.entries[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.entries.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// A new matrix made of the given rows, in the given order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("row selection is empty"));
        }
        let mut entries = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            if i >= self.rows {
                return Err(Error::invalid(format!("row {i} out of range ({} rows)", self.rows)));
            }
            entries.extend_from_slice(self.row(i));
        }
        Ok(LossMatrix {
            grid: self.grid.clone(),
            bound: self.bound,
            rows: indices.len(),
            entries,
        })
    }

    /// The first `k` rows.
    pub fn head(&self, k: usize) -> Result<Self> {
        self.select_rows(&(0..k.min(self.rows)).collect::<Vec<_>>())
    }

    /// Unchecked constructor for transforms that provably keep entries in range.
    pub(crate) fn from_parts(grid: Grid, bound: f64, rows: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), rows * grid.len());
        LossMatrix {
            grid,
            bound,
            rows,
            entries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new(vec![0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn out_of_range_names_the_cell() {
        let err = LossMatrix::from_rows(grid3(), 1.0, vec![vec![0.0, 0.1, 0.2], vec![0.3, 1.5, 0.0]])
            .unwrap_err();
        match err {
            Error::LossOutOfRange { row, column, value, .. } => {
                assert_eq!((row, column, value), (1, 1, 1.5));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(LossMatrix::from_rows(grid3(), 1.0, vec![vec![-0.0, 0.0, -1e-9]]).is_err());
        assert!(LossMatrix::from_rows(grid3(), 1.0, vec![vec![f64::NAN, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn shape_checks() {
        assert!(LossMatrix::from_rows(grid3(), 1.0, vec![]).is_err());
        assert!(LossMatrix::from_rows(grid3(), 1.0, vec![vec![0.0, 0.0]]).is_err());
        assert!(LossMatrix::from_rows(grid3(), 0.0, vec![vec![0.0; 3]]).is_err());
    }

    #[test]
    fn row_selection() {
        let m = LossMatrix::from_rows(grid3(), 1.0, vec![vec![0.1; 3], vec![0.2; 3]]).unwrap();
        let s = m.select_rows(&[1, 1, 0]).unwrap();
        assert_eq!(s.n_rows(), 3);
        assert_eq!(s.row(0), &[0.2; 3]);
        assert_eq!(s.row(2), &[0.1; 3]);
        assert!(m.select_rows(&[2]).is_err());
        assert_eq!(m.column(1).collect::<Vec<_>>(), vec![0.1, 0.2]);
    }
}
