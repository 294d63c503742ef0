//! Command-line front end for `nmcrc`.

pub mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use nmcrc::corrections::{
    bernstein_correction, empirical_bernstein_correction, hoeffding_correction,
    min_combined_correction, BootstrapConfig, CorrectionSpec, CorrectionValue,
};
use nmcrc::generators::{GeneratorSpec, Sample};
use nmcrc::harness::{counterexample_sweep, CounterexampleSweep, ExperimentPlan};
use nmcrc::io::{fmt_f64, read_loss_matrix, save_loss_matrix, write_results, write_true_curve};
use nmcrc::seed::substream;
use nmcrc::selectors::select_detailed;
use nmcrc::{Execution, LossMatrix, Method, MethodConfig};

use manifest::ManifestBuilder;

#[derive(Debug, Parser)]
#[command(name = "nmcrc", version, about = "Conformal risk control for non-monotone losses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate finite-sample level corrections.
    Correct(CorrectArgs),
    /// Select a grid point from a loss-matrix CSV.
    Select(SelectArgs),
    /// Write a seeded synthetic loss matrix.
    Generate(GenerateArgs),
    /// Analytic and Monte Carlo risk of CRC on the Bernoulli counterexample.
    SimulateCounterexample(SimulateArgs),
    /// Execute an experiment plan.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    Hoeffding,
    Bernstein,
    EmpiricalBernstein,
    MinCombined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[arg(long, value_enum)]
    pub kind: BoundKind,
    /// Grid sizes.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Vec<u64>,
    /// Calibration sizes.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Vec<u64>,
    /// Loss bound.
    #[arg(long = "bound", short = 'B', alias = "B", default_value_t = 1.0)]
    pub bound: f64,
    /// Standard-deviation caps (true for bernstein, empirical otherwise).
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write a manifest here; the printed output is saved beside it as `<stem>.out`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrectionFlags {
    /// Override the method's default correction.
    #[arg(long)]
    pub correction: Option<nmcrc::CorrectionKind>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub percentile: Option<f64>,
}

impl CorrectionFlags {
    pub fn spec(&self) -> anyhow::Result<Option<CorrectionSpec>> {
        use nmcrc::CorrectionKind as K;
        let Some(kind) = self.correction else {
            if self.sigma.is_some() || self.delta.is_some() || self.resamples.is_some() || self.percentile.is_some() {
                bail!("correction parameters given without --correction");
            }
            return Ok(None);
        };
        let delta = self.delta.unwrap_or(0.05);
        Ok(Some(match kind {
            K::Hoeffding => CorrectionSpec::Hoeffding,
            K::Bernstein => CorrectionSpec::Bernstein {
                sigma_max: self.sigma.context("bernstein needs --sigma")?,
            },
            K::EmpiricalBernstein => CorrectionSpec::EmpiricalBernstein { delta },
            K::MinCombined => CorrectionSpec::MinCombined { delta },
            K::BootstrapStability => CorrectionSpec::BootstrapStability {
                bootstrap: BootstrapConfig {
                    resamples: self.resamples.unwrap_or(BootstrapConfig::default().resamples),
                    percentile: self.percentile.unwrap_or(BootstrapConfig::default().percentile),
                },
            },
        }))
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub method: Method,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long = "bound", short = 'B', alias = "B", default_value_t = 1.0)]
    pub bound: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub correction: CorrectionFlags,
    /// Write a manifest here; the printed output is saved beside it as `<stem>.out`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator name, e.g. `bump`, `counterexample`, `multilabel`.
    pub generator: String,
    /// Rows to draw; the counterexample adds one test row.
    #[arg(long)]
    pub n: usize,
    /// Grid size override.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Target level; checked against the counterexample's validity range.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// JSON file with generator configuration fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Loss-matrix CSV; the true curve goes to `<stem>.truth.csv`.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write a manifest here; the printed output is saved beside it as `<stem>.out`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Disable data parallelism.
    #[arg(long)]
    pub sequential: bool,
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Correct(a) => cmd_correct(&a, stdout),
        Command::Select(a) => cmd_select(&a, stdout),
        Command::Generate(a) => cmd_generate(&a, stdout),
        Command::SimulateCounterexample(a) => cmd_simulate_counterexample(&a, stdout),
        Command::Run(a) => cmd_run(&a, stdout),
    }
}

/// Print `text`; with a manifest path, also save it as `<stem>.out` and write the manifest.
fn emit(
    text: &str,
    stdout: &mut dyn Write,
    manifest: Option<&Path>,
    builder: &mut ManifestBuilder,
) -> anyhow::Result<()> {
    stdout.write_all(text.as_bytes())?;
    if let Some(path) = manifest {
        let body = path.with_extension("out");
        fs::write(&body, text)?;
        builder.output(&body);
        builder.write(path)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CorrectionRow {
    m: u64,
    n: u64,
    sigma: Option<f64>,
    #[serde(flatten)]
    value: CorrectionValue,
}

pub fn cmd_correct(a: &CorrectArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let needs_sigma = a.kind != BoundKind::Hoeffding;
    if needs_sigma && a.sigma.is_empty() {
        bail!("--kind {:?} needs --sigma", a.kind);
    }
    if !needs_sigma && !a.sigma.is_empty() {
        bail!("hoeffding takes no --sigma");
    }
    let sigmas: Vec<Option<f64>> = if needs_sigma {
        a.sigma.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut rows = vec![];
    for &m in &a.m {
        for &sigma in &sigmas {
            for &n in &a.n {
                let (mu, nu) = (m as usize, n as usize);
                let value = match (a.kind, sigma) {
                    (BoundKind::Hoeffding, _) => hoeffding_correction(mu, nu, a.bound)?,
                    (BoundKind::Bernstein, Some(s)) => bernstein_correction(mu, nu, a.bound, s)?,
                    (BoundKind::EmpiricalBernstein, Some(s)) => {
                        empirical_bernstein_correction(mu, nu, a.bound, s, a.delta)?
                    }
                    (BoundKind::MinCombined, Some(s)) => min_combined_correction(mu, nu, a.bound, s, a.delta)?,
                    _ => unreachable!(),
                };
                rows.push(CorrectionRow { m, n, sigma, value });
            }
        }
    }
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => {
            let mut out = String::from("kind,m,n,sigma,amount,first_term,second_term,winner\n");
            for r in &rows {
                out += &format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.value.kind.name(),
                    r.m,
                    r.n,
                    r.sigma.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(r.value.amount),
                    fmt_f64(r.value.first_term),
                    fmt_f64(r.value.second_term),
                    r.value.winner.map(|w| w.name()).unwrap_or_default(),
                );
            }
            out
        }
    };
    let config = json!({
        "kind": format!("{:?}", a.kind), "m": a.m, "n": a.n, "bound": a.bound,
        "sigma": a.sigma, "delta": a.delta,
    });
    emit(&text, stdout, a.manifest.as_deref(), &mut ManifestBuilder::new("correct", config, None))
}

#[derive(Debug, Serialize)]
pub struct SelectReport {
    pub method: Method,
    pub alpha: f64,
    pub index: usize,
    pub lambda: f64,
    pub effective_level: f64,
    pub feasible: bool,
    pub correction: Option<CorrectionValue>,
}

pub fn select_report(losses: &LossMatrix, config: &MethodConfig, seed: Option<u64>) -> anyhow::Result<SelectReport> {
    let outcome = select_detailed(losses, config, seed, Execution::default())?;
    let s = outcome.selection;
    Ok(SelectReport {
        method: config.method,
        alpha: config.alpha,
        index: s.index,
        lambda: s.lambda,
        effective_level: s.effective_level,
        feasible: s.feasible,
        correction: outcome.correction,
    })
}

pub fn cmd_select(a: &SelectArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let losses = read_loss_matrix(&a.input, a.bound)?;
    let mut config = MethodConfig::new(a.method, a.alpha);
    if let Some(spec) = a.correction.spec()? {
        config = config.with_correction(spec);
    }
    let report = select_report(&losses, &config, a.seed)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    let mut builder = ManifestBuilder::new("select", serde_json::to_value(config)?, a.seed);
    builder.input(&a.input);
    emit(&text, stdout, a.manifest.as_deref(), &mut builder)
}

/// The generator spec named on the command line, with flag overrides.
pub fn generator_spec(a: &GenerateArgs) -> anyhow::Result<GeneratorSpec> {
    let mut obj = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json::from_str(&text)? {
                Value::Object(map) => map,
                _ => bail!("{} must hold a JSON object", path.display()),
            }
        }
        None => serde_json::Map::new(),
    };
    let takes_m = !matches!(a.generator.as_str(), "oversize" | "covariate-shift" | "matrix");
    if a.generator == "matrix" {
        bail!("`matrix` is an input source, not a generator");
    }
    if let Some(m) = a.m {
        if !takes_m {
            bail!("generator `{}` has no --m", a.generator);
        }
        obj.insert("m".into(), json!(m));
    }
    if let Some(p) = a.p {
        if !matches!(a.generator.as_str(), "counterexample" | "bernoulli") {
            bail!("generator `{}` has no --p", a.generator);
        }
        obj.insert("p".into(), json!(p));
    }
    obj.insert("name".into(), json!(a.generator));
    let spec: GeneratorSpec =
        serde_json::from_value(Value::Object(obj)).with_context(|| format!("generator `{}`", a.generator))?;
    if let (GeneratorSpec::Counterexample { p, .. }, Some(alpha)) = (&spec, a.alpha) {
        let lo = 1.0 / (a.n as f64 + 1.0);
        if !(lo < alpha && alpha < *p) {
            bail!("counterexample needs 1/(n+1) < alpha < p, got alpha = {alpha}, p = {p}, n = {}", a.n);
        }
    }
    Ok(spec)
}

/// The sample `generate` writes, reproducible in process.
pub fn generate_sample(spec: &GeneratorSpec, n: usize, seed: u64) -> anyhow::Result<Sample> {
    let rows = match spec {
        GeneratorSpec::Counterexample { .. } => n + 1,
        _ => n,
    };
    let model = spec.build(seed)?;
    Ok(model.draw(rows, &mut substream(seed, "generate", 0))?)
}

pub fn cmd_generate(a: &GenerateArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    if a.n == 0 {
        bail!("--n must be at least 1");
    }
    let spec = generator_spec(a)?;
    let sample = generate_sample(&spec, a.n, a.seed)?;
    let mut builder = ManifestBuilder::new(
        "generate",
        json!({"generator": spec, "n": a.n, "alpha": a.alpha}),
        Some(a.seed),
    );
    if let Some(c) = &a.config {
        builder.input(c);
    }
    save_loss_matrix(&a.output, &sample.losses)?;
    builder.output(&a.output);
    if let Some(truth) = spec.build(a.seed)?.true_risk() {
        let path = a.output.with_extension("truth.csv");
        write_true_curve(fs::File::create(&path)?, &truth)?;
        builder.output(&path);
    }
    let manifest = a
        .manifest
        .clone()
        .unwrap_or_else(|| a.output.with_extension("manifest.json"));
    builder.write(&manifest)?;
    writeln!(
        stdout,
        "wrote {} ({} x {})",
        a.output.display(),
        sample.losses.n_rows(),
        sample.losses.n_cols()
    )?;
    Ok(())
}

pub fn cmd_simulate_counterexample(a: &SimulateArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let sweep = CounterexampleSweep {
        p: a.p,
        alpha: a.alpha,
        ns: a.n.clone(),
        ms: a.m.clone(),
        trials: a.trials,
        seed: a.seed,
    };
    let rows = counterexample_sweep(&sweep, Execution::default())?;
    let mut text = String::from("n,m,analytic_risk,mc_risk,mc_se,controlled,control_bound,failure_bound\n");
    for r in &rows {
        text += &format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            r.m,
            fmt_f64(r.analytic_risk),
            r.mc_risk.map(fmt_f64).unwrap_or_default(),
            r.mc_se.map(fmt_f64).unwrap_or_default(),
            r.controlled,
            fmt_f64(r.control_bound),
            fmt_f64(r.failure_bound),
        );
    }
    let mut builder = ManifestBuilder::new("simulate-counterexample", serde_json::to_value(&sweep)?, Some(a.seed));
    emit(&text, stdout, a.manifest.as_deref(), &mut builder)
}

pub fn cmd_run(a: &RunArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.plan).with_context(|| format!("reading plan {}", a.plan.display()))?;
    let plan: ExperimentPlan =
        serde_json::from_str(&text).with_context(|| format!("parsing plan {}", a.plan.display()))?;
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let mut builder = ManifestBuilder::new("run", serde_json::to_value(&plan)?, Some(plan.seed));
    builder.input(&a.plan);
    let report = nmcrc::harness::run_experiment_with(&plan, exec)?;

    fs::create_dir_all(&a.out_dir)?;
    let results = a.out_dir.join("results.csv");
    write_results(fs::File::create(&results)?, &report.records)?;
    let summary = a.out_dir.join("summary.json");
    fs::write(&summary, serde_json::to_string_pretty(&report.summaries)? + "\n")?;
    builder.output(&results).output(&summary);
    builder.write(&a.out_dir.join("manifest.json"))?;

    for (method, s) in &report.summaries {
        writeln!(
            stdout,
            "{method:<18} mean risk {:.4} (se {:.4})  violations {:.3}",
            s.mean_risk, s.risk_se, s.violation_rate
        )?;
    }
    Ok(())
}
