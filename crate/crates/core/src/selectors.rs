//! Named end-to-end selection methods.
//!
//! | method | curve scanned | scan | level |
//! |--------|---------------|------|-------|
//! | `crc` | `R̂_n` | CRC | `α` |
//! | `crc-nm`, `crc-nm-*` | `R̂_n` | CRC | `α − D` |
//! | `loss-mono` | `R̃_n` | CRC | `α` |
//! | `risk-mono` | `R̂_n↑` | plain | `α` |
//! | `crc-c` | `R̂_n` | CRC | `α − β̂` |
//!
//! A correction larger than `α` leaves a non-positive level, which no grid
//! point can meet, so the selection falls through to the last grid point with
//! `feasible = false`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corrections::{CorrectionKind, CorrectionSpec, CorrectionValue};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::matrix::LossMatrix;
use crate::risk::{
    crc_scan, empirical_risk, loss_monotonized_risk, plain_scan, risk_monotonize,
    weighted_empirical_risk, Selection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Crc,
    CrcNm,
    LossMono,
    RiskMono,
    CrcC,
    CrcNmBernstein,
    CrcNmEmpbern,
    CrcNmMin,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Crc,
        Method::CrcNm,
        Method::LossMono,
        Method::RiskMono,
        Method::CrcC,
        Method::CrcNmBernstein,
        Method::CrcNmEmpbern,
        Method::CrcNmMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Crc => "crc",
            Method::CrcNm => "crc-nm",
            Method::LossMono => "loss-mono",
            Method::RiskMono => "risk-mono",
            Method::CrcC => "crc-c",
            Method::CrcNmBernstein => "crc-nm-bernstein",
            Method::CrcNmEmpbern => "crc-nm-empbern",
            Method::CrcNmMin => "crc-nm-min",
        }
    }

    /// The correction this method applies when none is configured, or
    /// `None` if it cannot pick one by itself.
    fn default_correction(self) -> Option<CorrectionSpec> {
        use crate::corrections::{BootstrapConfig, DEFAULT_DELTA};
        match self {
            Method::CrcNm => Some(CorrectionSpec::Hoeffding),
            Method::CrcNmEmpbern => Some(CorrectionSpec::EmpiricalBernstein {
                delta: DEFAULT_DELTA,
            }),
            Method::CrcNmMin => Some(CorrectionSpec::MinCombined {
                delta: DEFAULT_DELTA,
            }),
            Method::CrcC => Some(CorrectionSpec::BootstrapStability {
                bootstrap: BootstrapConfig::default(),
            }),
            _ => None,
        }
    }

    fn accepts(self, kind: CorrectionKind) -> bool {
        match self {
            Method::Crc | Method::LossMono | Method::RiskMono => false,
            Method::CrcNm => kind != CorrectionKind::BootstrapStability,
            Method::CrcNmBernstein => kind == CorrectionKind::Bernstein,
            Method::CrcNmEmpbern => kind == CorrectionKind::EmpiricalBernstein,
            Method::CrcNmMin => kind == CorrectionKind::MinCombined,
            Method::CrcC => kind == CorrectionKind::BootstrapStability,
        }
    }

    fn needs_correction(self) -> bool {
        !matches!(self, Method::Crc | Method::LossMono | Method::RiskMono)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// A method, its target level `α`, and optionally an explicit correction.
/// The loss bound comes from the matrix being calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionSpec>,
}

impl MethodConfig {
    pub fn new(method: Method, alpha: f64) -> Self {
        MethodConfig {
            method,
            alpha,
            correction: None,
        }
    }

    pub fn with_correction(mut self, correction: CorrectionSpec) -> Self {
        self.correction = Some(correction);
        self
    }

    /// The correction that will be applied, after defaults.
    pub fn resolved_correction(&self) -> Result<Option<CorrectionSpec>> {
        self.validate()?;
        Ok(self.correction.or_else(|| self.method.default_correction()))
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        let method = self.method;
        match self.correction {
            Some(spec) if !method.accepts(spec.kind()) => Err(Error::config(format!(
                "method `{method}` does not take a {} correction",
                spec.kind().name()
            ))),
            None if method.needs_correction() && method.default_correction().is_none() => Err(
                Error::config(format!("method `{method}` needs an explicit correction")),
            ),
            _ => Ok(()),
        }
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// A selection together with the correction that produced its level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOutcome {
    pub selection: Selection,
    pub correction: Option<CorrectionValue>,
}

pub fn select(matrix: &LossMatrix, config: &MethodConfig, seed: Option<u64>) -> Result<Selection> {
    Ok(select_detailed(matrix, config, seed, Execution::default())?.selection)
}

/// Run a method and report the correction breakdown alongside the selection.
/// `seed` is required by `crc-c` and ignored otherwise.
pub fn select_detailed(
    matrix: &LossMatrix,
    config: &MethodConfig,
    seed: Option<u64>,
    exec: Execution,
) -> Result<SelectOutcome> {
    let spec = config.resolved_correction()?;
    let (n, bound, alpha) = (matrix.n_rows(), matrix.bound(), config.alpha);

    let correction = match spec {
        Some(spec) => Some(spec.evaluate(matrix, alpha, seed, exec)?),
        None => None,
    };
    let level = correction.as_ref().map_or(alpha, |c| crc_nm_adjusted_level(alpha, c));

    let selection = match config.method {
        Method::Crc
        | Method::CrcNm
        | Method::CrcNmBernstein
        | Method::CrcNmEmpbern
        | Method::CrcNmMin
        | Method::CrcC => crc_scan(&empirical_risk(matrix), n, bound, level),
        Method::LossMono => crc_scan(&loss_monotonized_risk(matrix), n, bound, level),
        Method::RiskMono => plain_scan(&risk_monotonize(&empirical_risk(matrix)), level),
    };
    Ok(SelectOutcome {
        selection,
        correction,
    })
}

/// `α − amount`. May be non-positive.
pub fn crc_nm_adjusted_level(alpha: f64, correction: &CorrectionValue) -> f64 {
    alpha - correction.amount
}

/// Importance weights `w_i ∈ [0, W]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    cap: f64,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::invalid(format!("weight cap must be positive, got {cap}")));
        }
        if let Some(i) = weights.iter().position(|&w| !(0.0..=cap).contains(&w)) {
            return Err(Error::invalid(format!(
                "weight {} at row {i} outside [0, {cap}]",
                weights[i]
            )));
        }
        Ok(WeightVector { weights, cap })
    }

    pub fn unit(n: usize) -> Self {
        WeightVector {
            weights: vec![1.0; n],
            cap: 1.0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

/// CRC on the weighted empirical risk with the bound inflated to `W·B`.
pub fn weighted_select(matrix: &LossMatrix, weights: &WeightVector, alpha: f64) -> Result<Selection> {
    validate_alpha(alpha)?;
    let curve = weighted_empirical_risk(matrix, &weights.weights)?;
    Ok(crc_scan(&curve, matrix.n_rows(), weights.cap * matrix.bound(), alpha))
}
