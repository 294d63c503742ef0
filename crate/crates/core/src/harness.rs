//! Seeded Monte Carlo evaluation.
//!
//! Repetition `r` of a plan draws from `substream(seed, "repetition", r)`,
//! so reports do not depend on how repetitions are scheduled. Test risk per
//! repetition is the mean test-row loss at the selected grid point; a
//! violation is a test risk strictly above the method's `α`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::corrections::{bernstein_correction, hoeffding_correction, CorrectionSpec};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, try_map_indexed, Execution};
use crate::generators::{
    counterexample_analytic_risk, GeneratorSpec, LipschitzConfig, LipschitzModel, LossModel,
    PoolModel, Sample,
};
use crate::matrix::LossMatrix;
use crate::risk::{crc_condition, crc_scan, empirical_risk, plain_scan};
use crate::seed::{derive_seed, substream};
use crate::selectors::{select_detailed, weighted_select, MethodConfig, WeightVector};
use crate::stats::{mean, nearest_rank, standard_error};

/// Record label of the importance-weighted selector.
pub const WEIGHTED_METHOD: &str = "weighted-crc";

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// A fresh generator draw per repetition.
    #[default]
    Fresh,
    /// One pool of `pool_size` rows, split at random per repetition.
    Pool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPlan {
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    /// Also run the importance-weighted selector on weighted calibration rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted: Option<WeightedPlan>,
    pub repetitions: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub seed: u64,
    #[serde(default)]
    pub split: SplitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("plan needs at least one repetition"));
        }
        if self.n_cal == 0 || self.n_test == 0 {
            return Err(Error::config("plan needs n_cal ≥ 1 and n_test ≥ 1"));
        }
        if self.methods.is_empty() && self.weighted.is_none() {
            return Err(Error::config("plan lists no methods"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            m.validate()?;
            if !seen.insert(m.method) {
                return Err(Error::config(format!("method `{}` listed twice", m.method)));
            }
        }
        if let Some(w) = self.weighted {
            if !(w.alpha > 0.0 && w.alpha < 1.0) {
                return Err(Error::config(format!("alpha {} outside (0, 1)", w.alpha)));
            }
        }
        if self.split == SplitMode::Pool {
            let size = self
                .pool_size
                .ok_or_else(|| Error::config("pool split needs pool_size"))?;
            if size < self.n_cal + self.n_test {
                return Err(Error::config(format!(
                    "pool of {size} rows cannot hold {} + {}",
                    self.n_cal, self.n_test
                )));
            }
        }
        Ok(())
    }

    /// Label and `α` of every method the plan runs, in record order.
    pub fn labels(&self) -> Vec<(String, f64)> {
        let mut out: Vec<_> = self
            .methods
            .iter()
            .map(|m| (m.method.name().to_string(), m.alpha))
            .collect();
        if let Some(w) = self.weighted {
            out.push((WEIGHTED_METHOD.to_string(), w.alpha));
        }
        out
    }
}

/// One method on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: String,
    pub repetition: usize,
    pub selected_index: usize,
    pub selected_lambda: f64,
    pub effective_level: f64,
    pub feasible: bool,
    pub test_risk: f64,
    pub set_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub alpha: f64,
    pub repetitions: usize,
    pub mean_risk: f64,
    pub risk_se: f64,
    pub violation_rate: f64,
    /// Nearest-rank quantiles keyed by level.
    pub risk_quantiles: BTreeMap<String, f64>,
    pub mean_set_size: Option<f64>,
    pub mean_lambda: f64,
    pub infeasible_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<Record>,
    pub summaries: BTreeMap<String, MethodSummary>,
}

impl EvalReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.get(method)
    }

    pub fn records_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.method == method)
    }
}

/// Aggregate records per method. `levels` maps each method label to its `α`;
/// methods absent from `levels` are skipped.
pub fn summarize(records: &[Record], levels: &[(String, f64)]) -> BTreeMap<String, MethodSummary> {
    let mut out = BTreeMap::new();
    for (label, alpha) in levels {
        let rs: Vec<&Record> = records.iter().filter(|r| &r.method == label).collect();
        if rs.is_empty() {
            continue;
        }
        let count = rs.len() as f64;
        let risks: Vec<f64> = rs.iter().map(|r| r.test_risk).collect();
        let sizes: Option<Vec<f64>> = rs.iter().map(|r| r.set_size).collect();
        let risk_quantiles = QUANTILE_LEVELS
            .iter()
            .map(|&q| (q.to_string(), nearest_rank(&risks, q * 100.0)))
            .collect();
        out.insert(
            label.clone(),
            MethodSummary {
                alpha: *alpha,
                repetitions: rs.len(),
                mean_risk: mean(&risks),
                risk_se: standard_error(&risks),
                violation_rate: risks.iter().filter(|&&r| r > *alpha).count() as f64 / count,
                risk_quantiles,
                mean_set_size: sizes.map(|s| mean(&s)),
                mean_lambda: rs.iter().map(|r| r.selected_lambda).sum::<f64>() / count,
                infeasible_rate: rs.iter().filter(|r| !r.feasible).count() as f64 / count,
            },
        );
    }
    out
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<EvalReport> {
    run_experiment_with(plan, Execution::default())
}

pub fn run_experiment_with(plan: &ExperimentPlan, exec: Execution) -> Result<EvalReport> {
    plan.validate()?;
    let model = plan.generator.build(plan.seed)?;
    let model: Box<dyn LossModel> = match plan.split {
        SplitMode::Fresh => model,
        SplitMode::Pool => {
            let size = plan.pool_size.unwrap_or(plan.n_cal + plan.n_test);
            let pool = model.draw(size, &mut substream(plan.seed, "pool", 0))?;
            Box::new(PoolModel::new(pool))
        }
    };

    let per_rep = try_map_indexed(exec, plan.repetitions, |r| {
        run_repetition(plan, model.as_ref(), r).map_err(|e| Error::Repetition {
            repetition: r,
            source: Box::new(e),
        })
    })?;
    let records: Vec<Record> = per_rep.into_iter().flatten().collect();
    let summaries = summarize(&records, &plan.labels());
    Ok(EvalReport { records, summaries })
}

fn run_repetition(plan: &ExperimentPlan, model: &dyn LossModel, r: usize) -> Result<Vec<Record>> {
    let mut rng = substream(plan.seed, "repetition", r as u64);
    let split = model.draw_split(plan.n_cal, plan.n_test, &mut rng)?;
    let cal = &split.calibration;
    let method_seed = derive_seed(plan.seed, "method", r as u64);

    let mut out = Vec::with_capacity(plan.methods.len() + 1);
    for config in &plan.methods {
        let outcome = select_detailed(&cal.losses, config, Some(method_seed), Execution::Sequential)?;
        out.push(record(config.method.name(), r, outcome.selection, &split.test));
    }
    if let Some(w) = plan.weighted {
        let weights = cal
            .weights
            .clone()
            .ok_or_else(|| Error::config("weighted selection needs a generator with weights"))?;
        let cap = model
            .weight_cap()
            .ok_or_else(|| Error::config("generator has no weight cap"))?;
        let selection = weighted_select(&cal.losses, &WeightVector::new(weights, cap)?, w.alpha)?;
        out.push(record(WEIGHTED_METHOD, r, selection, &split.test));
    }
    Ok(out)
}

fn record(method: &str, repetition: usize, s: crate::risk::Selection, test: &Sample) -> Record {
    Record {
        method: method.to_string(),
        repetition,
        selected_index: s.index,
        selected_lambda: s.lambda,
        effective_level: s.effective_level,
        feasible: s.feasible,
        test_risk: test.mean_loss(s.index),
        set_size: test.mean_set_size(s.index),
    }
}

/// Per-realization quantities behind the three-term decomposition.
///
/// `crc` is the CRC selection on the first `n` rows, `prime` the plain
/// selection on all `n + 1` rows; both risks are `R̂_n` on the first `n` rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub crc_index: usize,
    pub crc_feasible: bool,
    pub prime_index: usize,
    pub prime_feasible: bool,
    pub risk_at_crc: f64,
    pub risk_at_prime: f64,
}

impl DecompositionRecord {
    /// `λ̂′ ≤ λ̂`.
    pub fn ordering_holds(&self) -> bool {
        self.prime_index <= self.crc_index
    }

    /// `R̂_n(λ̂) − R̂_n(λ̂′)`.
    pub fn term_two(&self) -> f64 {
        self.risk_at_crc - self.risk_at_prime
    }

    /// When `λ̂` met the calibration condition and `λ̂′ < λ̂`,
    /// `R̂_n(λ̂) < R̂_n(λ̂′)`. Vacuous when `λ̂` fell back to the last point.
    pub fn term_two_holds(&self) -> bool {
        !self.crc_feasible || self.prime_index == self.crc_index || self.term_two() < 0.0
    }
}

pub fn decomposition_probe(matrix: &LossMatrix, alpha: f64) -> Result<DecompositionRecord> {
    let total = matrix.n_rows();
    if total < 2 {
        return Err(Error::invalid("decomposition needs n + 1 ≥ 2 rows"));
    }
    let n = total - 1;
    let first = matrix.head(n)?;
    let r_n = empirical_risk(&first);
    let crc = crc_scan(&r_n, n, matrix.bound(), alpha);
    let prime = plain_scan(&empirical_risk(matrix), alpha);
    Ok(DecompositionRecord {
        crc_index: crc.index,
        crc_feasible: crc.feasible,
        prime_index: prime.index,
        prime_feasible: prime.feasible,
        risk_at_crc: r_n.value(crc.index),
        risk_at_prime: r_n.value(prime.index),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRow {
    pub n: usize,
    pub trials: usize,
    pub frequency: f64,
    pub se: f64,
    /// `exp(−2nε²/B²)`.
    pub bound: f64,
    /// Whether `ε ≥ (B − α)/n`.
    pub condition_met: bool,
}

/// Empirical `P(λ̂ ≠ λ̂′)` on the Lipschitz model, per sample size.
pub fn disagreement_sweep(
    config: &LipschitzConfig,
    ns: &[usize],
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<DisagreementRow>> {
    let model = LipschitzModel::new(config.clone())?;
    let (alpha, eps, b) = (config.alpha, config.epsilon, model.bound());
    ns.iter()
        .enumerate()
        .map(|(cell, &n)| {
            if n == 0 || trials == 0 {
                return Err(Error::config("disagreement sweep needs n ≥ 1 and trials ≥ 1"));
            }
            let cell_seed = derive_seed(seed, "disagreement", cell as u64);
            let hits = try_map_indexed(exec, trials, |t| -> Result<f64> {
                let mut rng = substream(cell_seed, "trial", t as u64);
                let rows = model.draw(n + 1, &mut rng)?.losses;
                let p = decomposition_probe(&rows, alpha)?;
                Ok(if p.crc_index != p.prime_index { 1.0 } else { 0.0 })
            })?;
            Ok(DisagreementRow {
                n,
                trials,
                frequency: mean(&hits),
                se: standard_error(&hits),
                bound: (-2.0 * n as f64 * eps * eps / (b * b)).exp(),
                condition_met: eps >= (b - alpha) / n as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSweep {
    pub p: f64,
    pub alpha: f64,
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    /// Monte Carlo trials per cell; 0 gives an analytic-only table.
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub n: usize,
    pub m: usize,
    pub analytic_risk: f64,
    pub mc_risk: Option<f64>,
    pub mc_se: Option<f64>,
    /// `analytic_risk ≤ α`.
    pub controlled: bool,
    /// `p·m·exp(−2n(p − t)²)` with `t = α − 1/(n+1)`.
    pub control_bound: f64,
    /// `p·(1 − exp(−m(1 − p)^n))`.
    pub failure_bound: f64,
}

/// Analytic and Monte Carlo risk of CRC on the counterexample over an
/// `(n, m)` grid of cells, `n` outer.
///
/// Each trial draws the `m` Bernoulli column sums of the calibration sample
/// as binomials, scans them left to right with the CRC condition, and draws
/// the test loss at the selection.
pub fn counterexample_sweep(sweep: &CounterexampleSweep, exec: Execution) -> Result<Vec<PhaseRow>> {
    let (p, alpha) = (sweep.p, sweep.alpha);
    let mut rows = Vec::with_capacity(sweep.ns.len() * sweep.ms.len());
    for &n in &sweep.ns {
        for &m in &sweep.ms {
            let analytic_risk = counterexample_analytic_risk(n, m, p, alpha)?;
            let (mc_risk, mc_se) = if sweep.trials == 0 {
                (None, None)
            } else {
                let cell_seed = derive_seed(sweep.seed, &format!("counterexample/{n}/{m}"), 0);
                let column = Binomial::new(n as u64, p)
                    .map_err(|e| Error::config(format!("binomial({n}, {p}): {e}")))?;
                let losses = map_indexed(exec, sweep.trials, |t| {
                    let mut rng = substream(cell_seed, "trial", t as u64);
                    let picked = (0..m).any(|_| {
                        let s = column.sample(&mut rng);
                        crc_condition(s as f64 / n as f64, n, 1.0, alpha)
                    });
                    if picked && rng.random_bool(p) {
                        1.0
                    } else {
                        0.0
                    }
                });
                (Some(mean(&losses)), Some(standard_error(&losses)))
            };
            let (nf, mf) = (n as f64, m as f64);
            let t = alpha - 1.0 / (nf + 1.0);
            rows.push(PhaseRow {
                n,
                m,
                analytic_risk,
                mc_risk,
                mc_se,
                controlled: analytic_risk <= alpha,
                control_bound: p * mf * (-2.0 * nf * (p - t) * (p - t)).exp(),
                failure_bound: p * (1.0 - (-mf * (1.0 - p).powf(nf)).exp()),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProbe {
    pub mean_sup_deviation: f64,
    pub se: f64,
    pub bound: f64,
}

/// Monte Carlo estimate of `E[sup_λ |R̂_n(λ) − R(λ)|]` next to its
/// Hoeffding or Bernstein bound.
pub fn uniform_concentration_probe(
    model: &dyn LossModel,
    n: usize,
    trials: usize,
    correction: &CorrectionSpec,
    seed: u64,
    exec: Execution,
) -> Result<ConcentrationProbe> {
    let truth = model
        .true_risk()
        .ok_or_else(|| Error::config("concentration probe needs a known true risk"))?;
    let m = model.grid().len();
    let bound = match *correction {
        CorrectionSpec::Hoeffding => hoeffding_correction(m, n, model.bound())?,
        CorrectionSpec::Bernstein { sigma_max } => bernstein_correction(m, n, model.bound(), sigma_max)?,
        _ => {
            return Err(Error::config(
                "concentration probe supports hoeffding and bernstein bounds",
            ))
        }
    };
    if trials == 0 {
        return Err(Error::config("concentration probe needs trials ≥ 1"));
    }
    let devs = try_map_indexed(exec, trials, |t| -> Result<f64> {
        let mut rng = substream(seed, "concentration", t as u64);
        let sample = model.draw(n, &mut rng)?;
        let r_hat = empirical_risk(&sample.losses);
        Ok(r_hat
            .values()
            .iter()
            .zip(truth.curve.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    })?;
    Ok(ConcentrationProbe {
        mean_sup_deviation: mean(&devs),
        se: standard_error(&devs),
        bound: bound.amount,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{BernoulliConfig, BernoulliModel, MonotoneConfig};
    use crate::grid::Grid;
    use crate::selectors::Method;

    fn plan(reps: usize) -> ExperimentPlan {
        ExperimentPlan {
            generator: GeneratorSpec::Monotone(MonotoneConfig {
                m: 20,
                ..Default::default()
            }),
            methods: vec![
                MethodConfig::new(Method::Crc, 0.2),
                MethodConfig::new(Method::CrcNm, 0.2),
                MethodConfig::new(Method::CrcC, 0.2),
            ],
            weighted: None,
            repetitions: reps,
            n_cal: 200,
            n_test: 100,
            seed: 7,
            split: SplitMode::Fresh,
            pool_size: None,
        }
    }

    #[test]
    fn deterministic_across_execution_modes() {
        let p = plan(6);
        let a = run_experiment_with(&p, Execution::Sequential).unwrap();
        let b = run_experiment_with(&p, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 18);
        assert_eq!(run_experiment(&plan(1)).unwrap(), run_experiment(&plan(1)).unwrap());
    }

    #[test]
    fn summaries_recompute_from_records() {
        let report = run_experiment(&plan(20)).unwrap();
        let again = summarize(&report.records, &plan(20).labels());
        assert_eq!(again, report.summaries);
        let crc = report.summary("crc").unwrap();
        let risks: Vec<f64> = report.records_for("crc").map(|r| r.test_risk).collect();
        assert_eq!(crc.mean_risk, mean(&risks));
        assert_eq!(crc.repetitions, 20);
        assert_eq!(crc.risk_quantiles.len(), 5);
        assert_eq!(crc.risk_quantiles["0.5"], nearest_rank(&risks, 50.0));
    }

    #[test]
    fn plan_validation() {
        let mut p = plan(0);
        assert!(run_experiment(&p).is_err());
        p.repetitions = 1;
        p.methods.push(MethodConfig::new(Method::Crc, 0.3));
        assert!(run_experiment(&p).is_err());
        let mut p = plan(1);
        p.split = SplitMode::Pool;
        assert!(run_experiment(&p).is_err());
        p.pool_size = Some(1000);
        assert!(run_experiment(&p).is_ok());
        let mut p = plan(1);
        p.weighted = Some(WeightedPlan { alpha: 0.2 });
        assert!(matches!(run_experiment(&p), Err(Error::Repetition { repetition: 0, .. })));
    }

    #[test]
    fn decomposition_by_hand() {
        let grid = Grid::uniform(0.0, 1.0, 3).unwrap();
        // First two rows give R̂_2 = [0.5, 0.05, 0.3]; the third row is the test row.
        let m = LossMatrix::from_rows(
            grid,
            1.0,
            vec![vec![0.5, 0.0, 0.3], vec![0.5, 0.1, 0.3], vec![0.0, 0.0, 0.0]],
        )
        .unwrap();
        let p = decomposition_probe(&m, 0.4).unwrap();
        // CRC: (2/3)r + 1/3 ≤ 0.4 needs r ≤ 0.1 → index 1.
        // Plain on 3 rows: R̂_3 = [1/3, 1/30, 0.2] → index 0.
        assert_eq!((p.crc_index, p.prime_index), (1, 0));
        assert!(p.ordering_holds() && p.term_two_holds());
        assert!((p.term_two() - (0.05 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn counterexample_sweep_analytic_only() {
        let sweep = CounterexampleSweep {
            p: 0.4,
            alpha: 0.2,
            ns: vec![10, 2000],
            ms: vec![1000],
            trials: 0,
            seed: 1,
        };
        let rows = counterexample_sweep(&sweep, Execution::Sequential).unwrap();
        assert!(rows[0].analytic_risk > 0.2 && !rows[0].controlled);
        assert!(rows[1].analytic_risk < 0.02 && rows[1].controlled);
        assert!(rows.iter().all(|r| r.mc_risk.is_none()));
        let other = CounterexampleSweep { seed: 99, ..sweep };
        let again = counterexample_sweep(&other, Execution::Sequential).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn concentration_probe_rate() {
        let model = BernoulliModel::new(BernoulliConfig { m: 20, p: 0.3 }).unwrap();
        let exec = Execution::default();
        let a = uniform_concentration_probe(&model, 200, 400, &CorrectionSpec::Hoeffding, 1, exec).unwrap();
        let b = uniform_concentration_probe(&model, 800, 400, &CorrectionSpec::Hoeffding, 1, exec).unwrap();
        assert!(a.mean_sup_deviation <= a.bound);
        let ratio = a.mean_sup_deviation / b.mean_sup_deviation;
        assert!((1.7..=2.3).contains(&ratio), "{ratio}");
        let err = uniform_concentration_probe(&model, 10, 1, &CorrectionSpec::MinCombined { delta: 0.05 }, 1, exec);
        assert!(err.is_err());
    }

    #[test]
    fn disagreement_vanishes_with_huge_margin() {
        let config = LipschitzConfig {
            alpha: 0.9,
            epsilon: 0.85,
            ..Default::default()
        };
        let rows = disagreement_sweep(&config, &[100], 200, 3, Execution::default()).unwrap();
        assert_eq!(rows[0].frequency, 0.0);
    }
}
