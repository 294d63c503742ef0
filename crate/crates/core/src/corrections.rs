//! Finite-sample excess-risk corrections.
//!
//! Each correction bounds how far the selected empirical risk can sit below
//! the true risk after searching an `m`-point grid with `n` samples:
//!
//! | kind | amount |
//! |------|--------|
//! | Hoeffding | `B√(ln(2m)/(2n)) + B/(2√(2n ln(2m)))` |
//! | Bernstein | `σ_max√(2 ln(2m)/n) + B ln(2m)/(3n)` |
//! | empirical Bernstein | `σ̂_max√(2 ln(2m/δ)/n) + 7B ln(2m/δ)/(3(n−1))` |
//! | min-combined | `min(Hoeffding, empirical Bernstein)` |
//! | bootstrap stability | nearest-rank percentile of resampled risk deviations |
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::matrix::LossMatrix;
use crate::risk::{crc_scan, empirical_risk, RiskCurve, RiskKind};
use crate::seed::substream;
use crate::stats::nearest_rank;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_RESAMPLES: usize = 200;
pub const DEFAULT_PERCENTILE: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionKind {
    Hoeffding,
    Bernstein,
    EmpiricalBernstein,
    MinCombined,
    BootstrapStability,
}

impl CorrectionKind {
    pub fn name(self) -> &'static str {
        match self {
            CorrectionKind::Hoeffding => "hoeffding",
            CorrectionKind::Bernstein => "bernstein",
            CorrectionKind::EmpiricalBernstein => "empirical-bernstein",
            CorrectionKind::MinCombined => "min-combined",
            CorrectionKind::BootstrapStability => "bootstrap-stability",
        }
    }
}

impl std::str::FromStr for CorrectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hoeffding" => CorrectionKind::Hoeffding,
            "bernstein" => CorrectionKind::Bernstein,
            "empirical-bernstein" => CorrectionKind::EmpiricalBernstein,
            "min-combined" => CorrectionKind::MinCombined,
            "bootstrap-stability" => CorrectionKind::BootstrapStability,
            other => return Err(Error::config(format!("unknown correction kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    /// In `(0, 100]`.
    #[serde(default = "default_percentile")]
    pub percentile: f64,
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

fn default_percentile() -> f64 {
    DEFAULT_PERCENTILE
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: DEFAULT_RESAMPLES,
            percentile: DEFAULT_PERCENTILE,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::config("bootstrap needs at least one resample"));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::config(format!(
                "bootstrap percentile {} outside (0, 100]",
                self.percentile
            )));
        }
        Ok(())
    }
}

/// Which correction to apply, with its kind-specific parameters. The loss
/// bound `B` always comes from the data being calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CorrectionSpec {
    Hoeffding,
    /// `sigma_max` is the population standard-deviation cap, `0 ≤ σ ≤ B`.
    Bernstein { sigma_max: f64 },
    EmpiricalBernstein {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    MinCombined {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    BootstrapStability {
        #[serde(flatten, default)]
        bootstrap: BootstrapConfig,
    },
}

impl CorrectionSpec {
    pub fn kind(&self) -> CorrectionKind {
        match self {
            CorrectionSpec::Hoeffding => CorrectionKind::Hoeffding,
            CorrectionSpec::Bernstein { .. } => CorrectionKind::Bernstein,
            CorrectionSpec::EmpiricalBernstein { .. } => CorrectionKind::EmpiricalBernstein,
            CorrectionSpec::MinCombined { .. } => CorrectionKind::MinCombined,
            CorrectionSpec::BootstrapStability { .. } => CorrectionKind::BootstrapStability,
        }
    }

    /// Evaluate against a calibration matrix. `level` and `seed` are used by
    /// the bootstrap only; the bootstrap errors without a seed.
    pub fn evaluate(
        &self,
        matrix: &LossMatrix,
        level: f64,
        seed: Option<u64>,
        exec: Execution,
    ) -> Result<CorrectionValue> {
        let (m, n, b) = (matrix.n_cols(), matrix.n_rows(), matrix.bound());
        match *self {
            CorrectionSpec::Hoeffding => hoeffding_correction(m, n, b),
            CorrectionSpec::Bernstein { sigma_max } => bernstein_correction(m, n, b, sigma_max),
            CorrectionSpec::EmpiricalBernstein { delta } => {
                empirical_bernstein_correction(m, n, b, empirical_sigma_max(matrix), delta)
            }
            CorrectionSpec::MinCombined { delta } => {
                min_combined_correction(m, n, b, empirical_sigma_max(matrix), delta)
            }
            CorrectionSpec::BootstrapStability { bootstrap } => {
                let seed = seed.ok_or_else(|| Error::config("bootstrap correction needs a seed"))?;
                bootstrap_stability_with(matrix, level, &bootstrap, seed, exec)
            }
        }
    }
}

/// A computed correction with its two-term breakdown.
///
/// `amount = first_term + second_term`. For the min-combined kind the terms
/// are those of the winning bound, `winner` names it and `runner_up` holds the
/// losing amount. For the bootstrap, `first_term` is `β̂` and the second is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionValue {
    pub kind: CorrectionKind,
    pub amount: f64,
    pub first_term: f64,
    pub second_term: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winner: Option<CorrectionKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runner_up: Option<f64>,
}

impl CorrectionValue {
    fn two_term(kind: CorrectionKind, first_term: f64, second_term: f64) -> Self {
        CorrectionValue {
            kind,
            amount: first_term + second_term,
            first_term,
            second_term,
            winner: None,
            runner_up: None,
        }
    }

    /// A zero correction of the given kind.
    pub fn zero(kind: CorrectionKind) -> Self {
        CorrectionValue::two_term(kind, 0.0, 0.0)
    }
}

fn check_common(m: usize, n: usize, bound: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("grid size m must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("sample size n must be at least 1"));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::invalid(format!("loss bound must be positive, got {bound}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64, bound: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma <= bound) {
        return Err(Error::invalid(format!("standard deviation {sigma} outside [0, {bound}]")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("confidence delta {delta} outside (0, 1)")));
    }
    Ok(())
}

/// `D(m, n) = B√(ln(2m)/(2n)) + B/(2√(2n ln(2m)))`.
pub fn hoeffding_correction(m: usize, n: usize, bound: f64) -> Result<CorrectionValue> {
    check_common(m, n, bound)?;
    let log2m = (2.0 * m as f64).ln();
    let n = n as f64;
    Ok(CorrectionValue::two_term(
        CorrectionKind::Hoeffding,
        bound * (log2m / (2.0 * n)).sqrt(),
        bound / (2.0 * (2.0 * n * log2m).sqrt()),
    ))
}

/// `σ_max√(2 ln(2m)/n) + B ln(2m)/(3n)`.
pub fn bernstein_correction(
    m: usize,
    n: usize,
    bound: f64,
    sigma_max: f64,
) -> Result<CorrectionValue> {
    check_common(m, n, bound)?;
    check_sigma(sigma_max, bound)?;
    let log2m = (2.0 * m as f64).ln();
    let n = n as f64;
    Ok(CorrectionValue::two_term(
        CorrectionKind::Bernstein,
        sigma_max * (2.0 * log2m / n).sqrt(),
        bound * log2m / (3.0 * n),
    ))
}

/// `σ̂_max√(2 ln(2m/δ)/n) + 7B ln(2m/δ)/(3(n−1))`; needs `n ≥ 2`.
pub fn empirical_bernstein_correction(
    m: usize,
    n: usize,
    bound: f64,
    sigma_hat_max: f64,
    delta: f64,
) -> Result<CorrectionValue> {
    check_common(m, n, bound)?;
    if n < 2 {
        return Err(Error::invalid("empirical Bernstein needs n ≥ 2"));
    }
    check_sigma(sigma_hat_max, bound)?;
    check_delta(delta)?;
    let log_term = (2.0 * m as f64 / delta).ln();
    let nf = n as f64;
    Ok(CorrectionValue::two_term(
        CorrectionKind::EmpiricalBernstein,
        sigma_hat_max * (2.0 * log_term / nf).sqrt(),
        7.0 * bound * log_term / (3.0 * (nf - 1.0)),
    ))
}

/// Largest per-column standard deviation, dividing by `n`.
pub fn empirical_sigma_max(matrix: &LossMatrix) -> f64 {
    let means = empirical_risk(matrix);
    let mut sq = vec![0.0; matrix.n_cols()];
    for row in matrix.rows() {
        for ((s, &v), &mu) in sq.iter_mut().zip(row).zip(means.values()) {
            *s += (v - mu) * (v - mu);
        }
    }
    let n = matrix.n_rows() as f64;
    sq.into_iter().map(|s| (s / n).sqrt()).fold(0.0, f64::max)
}

/// The smaller of the Hoeffding and empirical Bernstein corrections.
/// Ties go to Hoeffding.
pub fn min_combined_correction(
    m: usize,
    n: usize,
    bound: f64,
    sigma_hat_max: f64,
    delta: f64,
) -> Result<CorrectionValue> {
    let h = hoeffding_correction(m, n, bound)?;
    let eb = empirical_bernstein_correction(m, n, bound, sigma_hat_max, delta)?;
    let (won, lost) = if eb.amount < h.amount { (eb, h) } else { (h, eb) };
    Ok(CorrectionValue {
        kind: CorrectionKind::MinCombined,
        amount: won.amount,
        first_term: won.first_term,
        second_term: won.second_term,
        winner: Some(won.kind),
        runner_up: Some(lost.amount),
    })
}

/// Bootstrap stability estimate `β̂` using the default execution strategy.
pub fn bootstrap_stability(
    matrix: &LossMatrix,
    level: f64,
    config: &BootstrapConfig,
    seed: u64,
) -> Result<CorrectionValue> {
    bootstrap_stability_with(matrix, level, config, seed, Execution::default())
}

/// `β̂` = the configured percentile, over row resamples with replacement, of
/// `|R̂*_b(λ̂*_b) − R̂_n(λ̂)|`, where `λ̂` is the CRC selection at `level` on
/// the original matrix and `λ̂*_b` the CRC selection on resample `b`.
///
/// Resample `b` draws from its own substream of `seed`, so the value does not
/// depend on the execution strategy.
pub fn bootstrap_stability_with(
    matrix: &LossMatrix,
    level: f64,
    config: &BootstrapConfig,
    seed: u64,
    exec: Execution,
) -> Result<CorrectionValue> {
    config.validate()?;
    let n = matrix.n_rows();
    if n < 2 {
        return Err(Error::invalid("bootstrap stability needs at least two rows"));
    }
    let bound = matrix.bound();
    let original = empirical_risk(matrix);
    let reference = original.value(crc_scan(&original, n, bound, level).index);

    let deviations = map_indexed(exec, config.resamples, |b| {
        let mut rng = substream(seed, "bootstrap", b as u64);
        let curve = resample_risk(matrix, &mut rng);
        let pick = crc_scan(&curve, n, bound, level);
        (curve.value(pick.index) - reference).abs()
    });
    let beta = nearest_rank(&deviations, config.percentile);
    Ok(CorrectionValue::two_term(CorrectionKind::BootstrapStability, beta, 0.0))
}

fn resample_risk(matrix: &LossMatrix, rng: &mut impl rand::Rng) -> RiskCurve {
    let n = matrix.n_rows();
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    let mut sums = vec![0.0; matrix.n_cols()];
    for (row, &c) in matrix.rows().zip(&counts) {
        if c == 0 {
            continue;
        }
        let c = f64::from(c);
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += c * v;
        }
    }
    let nf = n as f64;
    RiskCurve::new(
        matrix.grid().clone(),
        sums.into_iter().map(|s| s / nf).collect(),
        RiskKind::Empirical,
    )
    .expect("resampled curve matches grid")
}
