//! Seeded synthetic loss models.
//!
//! A [`LossModel`] draws a calibration sample and a test sample together, so
//! that per-draw hidden state (a minimax instance's hidden column, a shifted
//! test distribution) is shared between them. Every model is a deterministic
//! function of the RNG handed to it.

mod bernoulli;
mod bump;
mod counterexample;
mod lipschitz;
mod minimax;
mod monotone;
mod multilabel;
mod oversize;
mod pool;
mod shift;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use bernoulli::{BernoulliConfig, BernoulliModel};
pub use bump::{BumpConfig, BumpModel};
pub use counterexample::{counterexample_analytic_risk, CounterexampleModel};
pub use lipschitz::{LipschitzConfig, LipschitzModel};
pub use minimax::{MinimaxConfig, MinimaxModel};
pub use monotone::{MonotoneConfig, MonotoneModel};
pub use multilabel::{precision_loss, MultilabelConfig, MultilabelModel};
pub use oversize::{
    detection_loss, detection_loss_from_counts, oversize_ramp, ClassificationSurrogate,
    CountRecord, DetectionSurrogate, OversizeConfig, OversizeModel,
};
pub use pool::PoolModel;
pub use shift::{ShiftConfig, ShiftModel};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::LossMatrix;
use crate::risk::RiskCurve;
use crate::seed::{derive_seed, SimRng};

/// Losses for a batch of rows, with optional per-cell prediction-set sizes
/// (row-major, same shape as the losses) and per-row importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub losses: LossMatrix,
    pub set_sizes: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

impl Sample {
    pub fn plain(losses: LossMatrix) -> Self {
        Sample {
            losses,
            set_sizes: None,
            weights: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.losses.n_rows()
    }

    /// Mean loss over rows at grid index `j`.
    pub fn mean_loss(&self, j: usize) -> f64 {
        self.losses.column(j).sum::<f64>() / self.n_rows() as f64
    }

    /// Mean set size over rows at grid index `j`, when sizes are recorded.
    pub fn mean_set_size(&self, j: usize) -> Option<f64> {
        let m = self.losses.n_cols();
        let sizes = self.set_sizes.as_ref()?;
        Some(sizes.iter().skip(j).step_by(m).sum::<f64>() / self.n_rows() as f64)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let m = self.losses.n_cols();
        Ok(Sample {
            losses: self.losses.select_rows(indices)?,
            set_sizes: self.set_sizes.as_ref().map(|s| {
                indices
                    .iter()
                    .flat_map(|&i| s[i * m..(i + 1) * m].iter().copied())
                    .collect()
            }),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub calibration: Sample,
    pub test: Sample,
}

/// A population risk curve, possibly a Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueCurve {
    pub curve: RiskCurve,
    pub estimated: bool,
}

pub trait LossModel: Send + Sync {
    fn grid(&self) -> &Grid;

    fn bound(&self) -> f64 {
        1.0
    }

    /// The importance-weight cap `W` when calibration rows carry weights.
    fn weight_cap(&self) -> Option<f64> {
        None
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split>;

    /// The population risk over the grid (test distribution), if known.
    fn true_risk(&self) -> Option<TrueCurve> {
        None
    }

    /// Just the calibration losses of a fresh draw.
    fn draw(&self, n: usize, rng: &mut SimRng) -> Result<Sample> {
        Ok(self.draw_split(n, 0, rng)?.calibration)
    }
}

fn check_rows(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("cannot draw zero rows"));
    }
    Ok(())
}

/// Build a matrix row by row from a row filler.
pub(crate) fn fill_rows(
    grid: &Grid,
    bound: f64,
    n: usize,
    rng: &mut SimRng,
    mut fill: impl FnMut(&mut SimRng, &mut [f64]),
) -> Result<LossMatrix> {
    check_rows(n)?;
    let m = grid.len();
    let mut entries = vec![0.0; n * m];
    for row in entries.chunks_exact_mut(m) {
        fill(rng, row);
    }
    LossMatrix::from_flat(grid.clone(), bound, entries)
}

/// An empty test sample stands in when `n_test = 0`.
pub(crate) fn split_of(
    n_cal: usize,
    n_test: usize,
    rng: &mut SimRng,
    mut draw: impl FnMut(usize, &mut SimRng) -> Result<Sample>,
) -> Result<Split> {
    let calibration = draw(n_cal, rng)?;
    let test = if n_test == 0 {
        Sample {
            losses: calibration.losses.head(1)?,
            set_sizes: None,
            weights: None,
        }
    } else {
        draw(n_test, rng)?
    };
    Ok(Split { calibration, test })
}

/// A loss matrix stored on disk, used as a fixed pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSource {
    pub path: PathBuf,
    pub bound: f64,
}

/// Any generator, by name, with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Counterexample { m: usize, p: f64 },
    Bump(BumpConfig),
    Multilabel(MultilabelConfig),
    Oversize(OversizeConfig),
    Minimax(MinimaxConfig),
    Monotone(MonotoneConfig),
    Lipschitz(LipschitzConfig),
    Bernoulli(BernoulliConfig),
    CovariateShift(ShiftConfig),
    Matrix(MatrixSource),
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::Counterexample { .. } => "counterexample",
            GeneratorSpec::Bump(_) => "bump",
            GeneratorSpec::Multilabel(_) => "multilabel",
            GeneratorSpec::Oversize(_) => "oversize",
            GeneratorSpec::Minimax(_) => "minimax",
            GeneratorSpec::Monotone(_) => "monotone",
            GeneratorSpec::Lipschitz(_) => "lipschitz",
            GeneratorSpec::Bernoulli(_) => "bernoulli",
            GeneratorSpec::CovariateShift(_) => "covariate-shift",
            GeneratorSpec::Matrix(_) => "matrix",
        }
    }

    /// Instantiate the model. `seed` fixes any per-model randomness (the
    /// multilabel predictor, the bump reference sample); per-draw randomness
    /// comes from the RNG passed to [`LossModel::draw_split`].
    pub fn build(&self, seed: u64) -> Result<Box<dyn LossModel>> {
        let model_seed = derive_seed(seed, "model", 0);
        Ok(match self {
            GeneratorSpec::Counterexample { m, p } => Box::new(CounterexampleModel::new(*m, *p)?),
            GeneratorSpec::Bump(c) => Box::new(BumpModel::new(c.clone(), model_seed)?),
            GeneratorSpec::Multilabel(c) => Box::new(MultilabelModel::new(c.clone(), model_seed)?),
            GeneratorSpec::Oversize(c) => Box::new(OversizeModel::new(c.clone())?),
            GeneratorSpec::Minimax(c) => Box::new(MinimaxModel::new(c.clone())?),
            GeneratorSpec::Monotone(c) => Box::new(MonotoneModel::new(c.clone())?),
            GeneratorSpec::Lipschitz(c) => Box::new(LipschitzModel::new(c.clone())?),
            GeneratorSpec::Bernoulli(c) => Box::new(BernoulliModel::new(c.clone())?),
            GeneratorSpec::CovariateShift(c) => Box::new(ShiftModel::new(c.clone())?),
            GeneratorSpec::Matrix(src) => {
                let losses = crate::io::read_loss_matrix(&src.path, src.bound)?;
                Box::new(PoolModel::new(Sample::plain(losses)))
            }
        })
    }
}

/// Uniform draw from `[lo, hi]`; degenerate ranges return `lo`.
pub(crate) fn uniform_in(rng: &mut SimRng, (lo, hi): (f64, f64)) -> f64 {
    use rand::Rng;
    lo + (hi - lo) * rng.random::<f64>()
}

pub(crate) fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::config(format!("{name} range [{lo}, {hi}] is invalid")));
    }
    Ok(())
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}
