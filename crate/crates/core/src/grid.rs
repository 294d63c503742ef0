use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, strictly increasing set of candidate parameter values.
///
/// Cloning is cheap: the values are shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid {
    values: Arc<[f64]>,
}

impl Grid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("grid must contain at least one value"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("grid value {v} is not finite")));
        }
        if let Some(w) = values.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "grid values must be strictly increasing (index {} -> {})",
                w,
                w + 1
            )));
        }
        Ok(Grid {
            values: values.into(),
        })
    }

    /// `m` evenly spaced points from `lo` to `hi` inclusive. With `m = 1`
    /// the single point is `lo`.
    pub fn uniform(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("grid size must be positive"));
        }
        if m > 1 && (lo.is_nan() || hi.is_nan() || lo >= hi) {
            return Err(Error::invalid(format!("empty grid range [{lo}, {hi}]")));
        }
        let values = if m == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (m - 1) as f64;
            (0..m)
                .map(|j| if j == m - 1 { hi } else { lo + step * j as f64 })
                .collect()
        };
        Grid::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a grid has at least one point.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn last_index(&self) -> usize {
        self.values.len() - 1
    }

    /// `λ_m − λ_1`.
    pub fn diameter(&self) -> f64 {
        self.values[self.values.len() - 1] - self.values[0]
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Grid::new(values)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(grid: Grid) -> Self {
        grid.values.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![0.1, 0.1]).is_err());
        assert!(Grid::new(vec![0.2, 0.1]).is_err());
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
        assert!(Grid::uniform(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn uniform_hits_endpoints() {
        let g = Grid::uniform(0.02, 0.75, 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g.value(0), 0.02);
        assert_eq!(g.value(199), 0.75);
        assert!((g.diameter() - 0.73).abs() < 1e-15);
        assert_eq!(Grid::uniform(0.5, 0.5, 1).unwrap().values(), &[0.5]);
    }
}
