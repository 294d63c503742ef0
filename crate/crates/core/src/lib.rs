//! Conformal risk control for bounded, possibly non-monotone losses over a
//! finite parameter grid.
//!
//! The universal input is a [`LossMatrix`]: `n` calibration samples by `m`
//! grid points. Selectors in [`selectors`] reduce it to a [`Selection`];
//! [`corrections`] supplies the finite-sample level adjustments;
//! [`generators`] produces seeded synthetic matrices; [`harness`] runs
//! repeated calibration/test experiments.
//!
//! ```
//! use nmcrc::{select, Grid, LossMatrix, Method, MethodConfig};
//!
//! let grid = Grid::uniform(0.0, 1.0, 3)?;
//! let losses = LossMatrix::from_rows(grid, 1.0, vec![vec![0.4, 0.0, 0.1]; 50])?;
//! let pick = select(&losses, &MethodConfig::new(Method::Crc, 0.1), None)?;
//! assert_eq!(pick.index, 1);
//! # Ok::<(), nmcrc::Error>(())
//! ```

pub mod corrections;
pub mod error;
pub mod exec;
pub mod generators;
pub mod grid;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod risk;
pub mod seed;
pub mod selectors;
pub mod stats;

pub use corrections::{CorrectionKind, CorrectionSpec, CorrectionValue};
pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::Grid;
pub use matrix::LossMatrix;
pub use risk::{
    crc_scan, empirical_risk, grid_oracle, loss_monotonize, plain_scan, risk_monotonize, RiskCurve,
    RiskKind, Selection,
};
pub use selectors::{select, weighted_select, Method, MethodConfig, WeightVector};
