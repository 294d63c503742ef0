use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{split_of, LossModel, Sample, Split};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::LossMatrix;
use crate::seed::SimRng;

/// `φ(s) = min((s − K₀)₊ / τ, 1)`.
pub fn oversize_ramp(size: f64, k0: f64, tau: f64) -> f64 {
    ((size - k0).max(0.0) / tau).min(1.0)
}

/// `(1 − γ)(1 − n_matched/n_gt) + γ·φ(size)`.
pub fn detection_loss(n_matched: u32, n_gt: u32, set_size: u32, gamma: f64, k0: u32, tau: f64) -> f64 {
    let miss = 1.0 - f64::from(n_matched) / f64::from(n_gt);
    (1.0 - gamma) * miss + gamma * oversize_ramp(f64::from(set_size), f64::from(k0), tau)
}

/// Softmax classifier surrogate. The set at `λ` is the shortest prefix of
/// classes, by descending probability, whose cumulative mass reaches `λ`
/// (never empty). Loss `(1 − γ)·1{Y ∉ C} + γ·1{|C| > K₀}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassificationSurrogate {
    pub m: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub gamma: f64,
    pub k0: u32,
    pub classes: usize,
    /// Logit boost of the true class over standard-normal logits.
    pub signal: f64,
}

impl Default for ClassificationSurrogate {
    fn default() -> Self {
        ClassificationSurrogate {
            m: 100,
            lambda_min: 0.05,
            lambda_max: 0.995,
            gamma: 0.10,
            k0: 5,
            classes: 20,
            signal: 2.5,
        }
    }
}

/// Detector surrogate. Each image has `Poisson(mean_objects) + 1` objects
/// and `Poisson(mean_clutter)` spurious candidates; object scores are
/// `U^{1/(1+tilt)}`, clutter scores `U^{1+tilt}`. The set at `λ` keeps
/// candidates scoring at least `1 − λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionSurrogate {
    pub m: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub gamma: f64,
    pub k0: u32,
    pub tau: f64,
    pub mean_objects: f64,
    pub mean_clutter: f64,
    pub tilt: f64,
}

impl Default for DetectionSurrogate {
    fn default() -> Self {
        DetectionSurrogate {
            m: 200,
            lambda_min: 0.02,
            lambda_max: 0.75,
            gamma: 0.35,
            k0: 3,
            tau: 5.0,
            mean_objects: 4.0,
            mean_clutter: 6.0,
            tilt: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum OversizeConfig {
    Classification(ClassificationSurrogate),
    Detection(DetectionSurrogate),
}

impl Default for OversizeConfig {
    fn default() -> Self {
        OversizeConfig::Detection(DetectionSurrogate::default())
    }
}

#[derive(Debug, Clone)]
pub struct OversizeModel {
    config: OversizeConfig,
    grid: Grid,
    objects: Option<Poisson<f64>>,
    clutter: Option<Poisson<f64>>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config(format!("gamma = {gamma} outside [0, 1]")));
    }
    Ok(())
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::config(format!("Poisson mean {mean}: {e}")))
}

fn draw_count(dist: &Option<Poisson<f64>>, rng: &mut SimRng) -> u32 {
    dist.as_ref().map_or(0, |d| d.sample(rng) as u32)
}

impl OversizeModel {
    pub fn new(config: OversizeConfig) -> Result<Self> {
        let (grid, objects, clutter) = match &config {
            OversizeConfig::Classification(c) => {
                check_gamma(c.gamma)?;
                if c.classes < 2 {
                    return Err(Error::config("classification surrogate needs ≥ 2 classes"));
                }
                (Grid::uniform(c.lambda_min, c.lambda_max, c.m)?, None, None)
            }
            OversizeConfig::Detection(c) => {
                check_gamma(c.gamma)?;
                if c.tau.is_nan() || c.tau <= 0.0 || c.tilt.is_nan() || c.tilt < 0.0 {
                    return Err(Error::config("detection surrogate needs tau > 0 and tilt ≥ 0"));
                }
                (
                    Grid::uniform(c.lambda_min, c.lambda_max, c.m)?,
                    poisson(c.mean_objects)?,
                    poisson(c.mean_clutter)?,
                )
            }
        };
        Ok(OversizeModel {
            config,
            grid,
            objects,
            clutter,
        })
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<Sample> {
        if n == 0 {
            return Err(Error::config("cannot draw zero rows"));
        }
        let m = self.grid.len();
        let mut losses = Vec::with_capacity(n * m);
        let mut sizes = Vec::with_capacity(n * m);
        for _ in 0..n {
            match &self.config {
                OversizeConfig::Classification(c) => {
                    self.classification_row(c, rng, &mut losses, &mut sizes)
                }
                OversizeConfig::Detection(c) => self.detection_row(c, rng, &mut losses, &mut sizes),
            }
        }
        Ok(Sample {
            losses: LossMatrix::from_flat(self.grid.clone(), 1.0, losses)?,
            set_sizes: Some(sizes),
            weights: None,
        })
    }

    fn classification_row(
        &self,
        c: &ClassificationSurrogate,
        rng: &mut SimRng,
        losses: &mut Vec<f64>,
        sizes: &mut Vec<f64>,
    ) {
        let label = rng.random_range(0..c.classes);
        let mut logits: Vec<(f64, bool)> = (0..c.classes)
            .map(|k| {
                let z: f64 = StandardNormal.sample(rng);
                (z + if k == label { c.signal } else { 0.0 }, k == label)
            })
            .collect();
        let top = logits.iter().map(|l| l.0).fold(f64::NEG_INFINITY, f64::max);
        for l in &mut logits {
            l.0 = (l.0 - top).exp();
        }
        let total: f64 = logits.iter().map(|l| l.0).sum();
        logits.sort_by(|a, b| b.0.total_cmp(&a.0));

        let (mut size, mut mass, mut covered) = (0usize, 0.0, false);
        for &lam in self.grid.values() {
            while size < c.classes && (size == 0 || mass < lam) {
                mass += logits[size].0 / total;
                covered |= logits[size].1;
                size += 1;
            }
            let miss = if covered { 0.0 } else { 1.0 };
            let over = if size > c.k0 as usize { 1.0 } else { 0.0 };
            losses.push((1.0 - c.gamma) * miss + c.gamma * over);
            sizes.push(size as f64);
        }
    }

    fn detection_row(
        &self,
        c: &DetectionSurrogate,
        rng: &mut SimRng,
        losses: &mut Vec<f64>,
        sizes: &mut Vec<f64>,
    ) {
        let n_gt = draw_count(&self.objects, rng) + 1;
        let n_clutter = draw_count(&self.clutter, rng);
        let mut scores: Vec<(f64, bool)> = Vec::with_capacity((n_gt + n_clutter) as usize);
        for _ in 0..n_gt {
            scores.push((rng.random::<f64>().powf(1.0 / (1.0 + c.tilt)), true));
        }
        for _ in 0..n_clutter {
            scores.push((rng.random::<f64>().powf(1.0 + c.tilt), false));
        }
        scores.sort_by(|a, b| b.0.total_cmp(&a.0));

        let (mut size, mut matched) = (0usize, 0u32);
        for &lam in self.grid.values() {
            while size < scores.len() && scores[size].0 >= 1.0 - lam {
                matched += u32::from(scores[size].1);
                size += 1;
            }
            losses.push(detection_loss(matched, n_gt, size as u32, c.gamma, c.k0, c.tau));
            sizes.push(size as f64);
        }
    }
}

impl LossModel for OversizeModel {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw_split(&self, n_cal: usize, n_test: usize, rng: &mut SimRng) -> Result<Split> {
        split_of(n_cal, n_test, rng, |n, rng| self.sample(n, rng))
    }
}

/// One `(sample, λ)` cell of detector output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub sample_id: u64,
    pub lambda_index: usize,
    pub n_matched: u32,
    pub n_gt: u32,
    pub set_size: u32,
}

/// Assemble a detection loss matrix from count records covering every
/// `(sample, λ)` cell exactly once. Rows are ordered by sample id.
pub fn detection_loss_from_counts(
    records: &[CountRecord],
    grid: &Grid,
    gamma: f64,
    k0: u32,
    tau: f64,
) -> Result<LossMatrix> {
    check_gamma(gamma)?;
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::invalid(format!("tau = {tau} must be positive")));
    }
    let m = grid.len();
    let mut cells: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    for r in records {
        if r.n_gt == 0 {
            return Err(Error::invalid(format!(
                "sample {} at lambda index {} has n_gt = 0",
                r.sample_id, r.lambda_index
            )));
        }
        if r.n_matched > r.n_gt {
            return Err(Error::invalid(format!(
                "sample {} at lambda index {} matches {} of {} objects",
                r.sample_id, r.lambda_index, r.n_matched, r.n_gt
            )));
        }
        if r.lambda_index >= m {
            return Err(Error::invalid(format!(
                "lambda index {} out of range for a grid of {m}",
                r.lambda_index
            )));
        }
        let row = cells.entry(r.sample_id).or_insert_with(|| vec![None; m]);
        let cell = &mut row[r.lambda_index];
        if cell.is_some() {
            return Err(Error::invalid(format!(
                "duplicate record for sample {} at lambda index {}",
                r.sample_id, r.lambda_index
            )));
        }
        *cell = Some(detection_loss(r.n_matched, r.n_gt, r.set_size, gamma, k0, tau));
    }
    if cells.is_empty() {
        return Err(Error::invalid("no count records"));
    }
    let mut entries = Vec::with_capacity(cells.len() * m);
    for (id, row) in cells {
        for (j, v) in row.into_iter().enumerate() {
            entries.push(v.ok_or_else(|| {
                Error::invalid(format!("sample {id} has no record at lambda index {j}"))
            })?);
        }
    }
    LossMatrix::from_flat(grid.clone(), 1.0, entries)
}
