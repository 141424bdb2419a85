//! The `imputation-audit` command-line program.
//!
//! Every subcommand prints one JSON report on stdout. The report header
//! carries the tool version, the resolved invocation and the master seed,
//! so `imputation-audit replay --report FILE` reproduces it byte for byte.
//! With `--out DIR` the report is also written to `DIR/report.json` and the
//! plot-ready series to `DIR/series.csv`.
//!
//! Exit codes: 0 success, 2 usage error, 3 bad input data or configuration,
//! 4 a mathematical guard (empty cell, zero denominator, ...).

mod ingest;

pub use ingest::{ingest_csv, ingest_reader, DataConfig};

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::{CellSelector, FinitePopulation, Interval, ObservationTable, Regime, DERIVED_TOL};
use crate::ecological::{duncan_davis_bounds, ShortDistributions};
use crate::error::{Error, Result};
use crate::missing_covariate::{
    binary_bounds_closed_form, mixture_conditional_mean, mixture_joint_estimate, q_from_fitted, BoundsSource,
};
use crate::missing_outcome::{q_mean_estimate, sample_cell, sample_interval};
use crate::rmi::{fit_model, run_multiple_imputation_fitted, Estimator, ImputationModel, MultipleImputationResult};
use crate::simlab::{bias_gap, convergence_experiment, ExperimentSpec, ModelSpec};
use crate::VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "imputation-audit",
    version,
    about = "Bounds and imputation audits for conditional means with missing data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assumption-free interval and midpoint for the target cell.
    Bounds(BoundsArgs),
    /// Imputation, assumed-mean and mixture estimates under a model.
    Estimate(EstimateArgs),
    /// Run a convergence experiment from a spec file.
    Simulate(SimulateArgs),
    /// Multiple imputation next to the assumption-free interval.
    Audit(AuditArgs),
    /// Bounds on P(y=1 | x, w) from the short distributions.
    Ecological(EcologicalArgs),
    /// Rerun the invocation recorded in a report.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON data configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Target `x` cell as `name=level[,name=level...]`.
    #[arg(long)]
    pub xi: String,
    /// Target `w` cell; selects the missing-covariate analysis.
    #[arg(long)]
    pub omega: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// mar | marcov | ecological | q:FILE
    #[arg(long)]
    pub model: String,
    /// Number of random imputations.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AuditArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    /// Population JSON for an exact bias-gap computation alongside the data.
    #[arg(long)]
    pub population: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EcologicalArgs {
    /// P(y = 1 | x = xi).
    #[arg(long)]
    pub py: f64,
    /// P(w = omega | x = xi).
    #[arg(long)]
    pub pw: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved invocation stored in a report header.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Invocation {
    Bounds {
        args: BoundsArgs,
        data_config: DataConfig,
    },
    Estimate {
        args: EstimateArgs,
        data_config: DataConfig,
    },
    Audit {
        args: AuditArgs,
        data_config: DataConfig,
    },
    Simulate {
        spec: ExperimentSpec,
    },
    Ecological {
        args: EcologicalArgs,
    },
}

impl Invocation {
    fn name(&self) -> &'static str {
        match self {
            Self::Bounds { .. } => "bounds",
            Self::Estimate { .. } => "estimate",
            Self::Audit { .. } => "audit",
            Self::Simulate { .. } => "simulate",
            Self::Ecological { .. } => "ecological",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Self::Estimate { args, .. } => Some(args.seed),
            Self::Audit { args, .. } => Some(args.seed),
            Self::Simulate { spec } => Some(spec.seed),
            _ => None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Report {
    tool: String,
    version: String,
    command: String,
    seed: Option<u64>,
    config: Invocation,
    result: Value,
}

/// Plot-ready table written next to the report.
#[derive(Debug, Default)]
struct Series {
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            let debug = format!("{e:?}");
            let kind = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error");
            eprintln!("error[{kind}]: {e}");
            exit_code(&e)
        }
    }
}

/// 3 for malformed data or configuration, 4 for guard failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_data_error() {
        3
    } else {
        4
    }
}

/// Runs one command, writing its JSON report to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let cwd = PathBuf::from(".");
    let (invocation, out) = match cli.command {
        Command::Bounds(args) => {
            let data_config = DataConfig::from_path(&args.data.config)?;
            let out = args.out.clone();
            (Invocation::Bounds { args, data_config }, out)
        }
        Command::Estimate(args) => {
            let data_config = DataConfig::from_path(&args.data.config)?;
            let out = args.out.clone();
            (Invocation::Estimate { args, data_config }, out)
        }
        Command::Audit(args) => {
            let data_config = DataConfig::from_path(&args.data.config)?;
            let out = args.out.clone();
            (Invocation::Audit { args, data_config }, out)
        }
        Command::Simulate(args) => {
            let spec = ExperimentSpec::from_path(&args.spec)?;
            let base = args.spec.parent().unwrap_or(&cwd);
            let (_, resolved) = spec.resolve(base)?;
            (Invocation::Simulate { spec: resolved }, args.out)
        }
        Command::Ecological(args) => {
            let out = args.out.clone();
            (Invocation::Ecological { args }, out)
        }
        Command::Replay(args) => {
            let report: Report = serde_json::from_str(&std::fs::read_to_string(&args.report)?)?;
            (report.config, args.out)
        }
    };
    let (result, series) = execute(&invocation, &cwd)?;
    let report = Report {
        tool: "imputation-audit".into(),
        version: VERSION.into(),
        command: invocation.name().into(),
        seed: invocation.seed(),
        config: invocation,
        result,
    };
    let text = serde_json::to_string_pretty(&report)?;
    writeln!(stdout, "{text}")?;
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("report.json"), format!("{text}\n"))?;
        write_series(&dir.join("series.csv"), &series)?;
    }
    Ok(())
}

fn write_series(path: &Path, series: &Series) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&series.header)?;
    for row in &series.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn execute(inv: &Invocation, cwd: &Path) -> Result<(Value, Series)> {
    match inv {
        Invocation::Bounds { args, data_config } => {
            let (table, sel) = load(&args.data, data_config)?;
            bounds(&table, &sel)
        }
        Invocation::Estimate { args, data_config } => {
            let (table, sel) = load(&args.data, data_config)?;
            estimate(&table, &sel, &args.model, args.m, args.seed, cwd)
        }
        Invocation::Audit { args, data_config } => {
            let (table, sel) = load(&args.data, data_config)?;
            audit(&table, &sel, args, cwd)
        }
        Invocation::Simulate { spec } => {
            let (exp, _) = spec.resolve(cwd)?;
            let report = convergence_experiment(&exp)?;
            let series = Series {
                header: vec![
                    "n",
                    "mean_abs_dev",
                    "max_abs_dev",
                    "mean_estimate",
                    "sd_estimate",
                    "skipped",
                ],
                rows: report
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n as f64,
                            r.mean_abs_dev,
                            r.max_abs_dev,
                            r.mean_estimate,
                            r.sd_estimate,
                            r.skipped as f64,
                        ]
                    })
                    .collect(),
            };
            Ok((serde_json::to_value(&report)?, series))
        }
        Invocation::Ecological { args } => {
            let sd = ShortDistributions::new(args.py, args.pw)?;
            let b = duncan_davis_bounds(&sd);
            Ok((
                json!({ "interval": b, "midpoint": b.midpoint() }),
                squared_bias_series(&b, &Interval { lo: 0.0, hi: 1.0 }),
            ))
        }
    }
}

fn load(args: &DataArgs, cfg: &DataConfig) -> Result<(ObservationTable, CellSelector)> {
    let table = ingest_csv(&args.data, cfg)?;
    let xi = table.x_space().parse(&args.xi)?;
    let sel = match &args.omega {
        Some(o) => CellSelector::long(xi, table.w_space().parse(o)?),
        None => CellSelector::at(xi),
    };
    Ok((table, sel))
}

fn regime_of(sel: &CellSelector) -> Regime {
    if sel.omega.is_some() {
        Regime::Covariate
    } else {
        Regime::Outcome
    }
}

/// `(gamma, max squared bias)` on 101 candidates spanning `range`.
fn squared_bias_series(interval: &Interval, range: &Interval) -> Series {
    Series {
        header: vec!["gamma", "max_squared_bias"],
        rows: (0..=100)
            .map(|i| {
                let c = range.lo + range.width() * i as f64 / 100.0;
                vec![c, interval.max_squared_bias(c)]
            })
            .collect(),
    }
}

fn sample_bounds(table: &ObservationTable, sel: &CellSelector) -> Result<Interval> {
    match regime_of(sel) {
        Regime::Outcome => sample_interval(table, sel),
        Regime::Covariate => binary_bounds_closed_form(BoundsSource::Sample(table), sel),
    }
}

fn bounds(table: &ObservationTable, sel: &CellSelector) -> Result<(Value, Series)> {
    let interval = sample_bounds(table, sel)?;
    let mut result = json!({
        "regime": regime_of(sel),
        "cell": sel.describe(table.x_space(), table.w_space()),
        "interval": interval,
        "midpoint": interval.midpoint(),
    });
    if regime_of(sel) == Regime::Outcome {
        result["sample"] = serde_json::to_value(sample_cell(table, sel)?)?;
    }
    Ok((result, squared_bias_series(&interval, &table.domain().as_interval())))
}

fn resolve_model(table: &ObservationTable, sel: &CellSelector, model: &str, cwd: &Path) -> Result<ImputationModel> {
    let spec: ModelSpec = model.parse()?;
    spec.resolve(regime_of(sel), table.x_space(), table.w_space(), None, None, cwd)
}

fn draws_series(mi: &MultipleImputationResult) -> Series {
    Series {
        header: vec!["draw", "estimate"],
        rows: mi
            .per_draw_estimates
            .iter()
            .enumerate()
            .map(|(k, &e)| vec![k as f64, e])
            .collect(),
    }
}

fn estimate(
    table: &ObservationTable,
    sel: &CellSelector,
    model: &str,
    m: usize,
    seed: u64,
    cwd: &Path,
) -> Result<(Value, Series)> {
    let model = resolve_model(table, sel, model, cwd)?;
    let fitted = fit_model(&model, table)?;
    let regime = regime_of(sel);
    let mi = run_multiple_imputation_fitted(table, &fitted, m, Estimator::for_regime(regime), sel, seed)?;
    let mut result = json!({
        "regime": regime,
        "model": model.name(),
        "cell": sel.describe(table.x_space(), table.w_space()),
        "imputation": mi,
    });
    match regime {
        Regime::Outcome => {
            let e_q = fitted
                .outcome_mean(sel.xi)
                .ok_or_else(|| Error::ModelUndefinedOnCell(sel.describe(table.x_space(), table.w_space())))?;
            let interval = sample_interval(table, sel)?;
            result["e_q"] = json!(e_q);
            result["q_mean"] = json!(q_mean_estimate(table, sel, e_q)?);
            result["interval"] = json!(interval);
            result["midpoint"] = json!(interval.midpoint());
        }
        Regime::Covariate => {
            let q = q_from_fitted(&fitted, table.x_space(), &observed_outcomes(table))
                .expect("covariate models expand to a covariate distribution");
            result["mixture"] = json!(mixture_conditional_mean(&mixture_joint_estimate(table, &q)?, sel)?);
            if table.domain().binary {
                let interval = binary_bounds_closed_form(BoundsSource::Sample(table), sel)?;
                result["interval"] = json!(interval);
                result["midpoint"] = json!(interval.midpoint());
            }
        }
    }
    Ok((result, draws_series(&mi)))
}

fn observed_outcomes(table: &ObservationTable) -> Vec<f64> {
    let mut ys: Vec<f64> = table.records().iter().filter_map(|r| r.y).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    ys
}

fn audit(table: &ObservationTable, sel: &CellSelector, args: &AuditArgs, cwd: &Path) -> Result<(Value, Series)> {
    let model = resolve_model(table, sel, &args.model, cwd)?;
    let regime = regime_of(sel);
    let fitted = fit_model(&model, table)?;
    let mi = run_multiple_imputation_fitted(table, &fitted, args.m, Estimator::for_regime(regime), sel, args.seed)?;
    let interval = sample_bounds(table, sel)?;
    let inside = interval.contains(mi.pooled_mean, DERIVED_TOL);
    let headline = format!(
        "{} estimate under model {}: {:.4}; assumption-free interval [{:.4}, {:.4}]",
        sel.describe(table.x_space(), table.w_space()),
        model.name(),
        mi.pooled_mean,
        interval.lo,
        interval.hi
    );
    eprintln!("{headline}");
    let mut result = json!({
        "regime": regime,
        "model": model.name(),
        "headline": headline,
        "imputation": mi,
        "interval": interval,
        "midpoint": interval.midpoint(),
        "estimate_in_interval": inside,
    });
    if let Some(path) = &args.population {
        let pop = FinitePopulation::from_path(path)?;
        let spec: ModelSpec = args.model.parse()?;
        let pop_model = spec.resolve(pop.regime(), pop.x_space(), pop.w_space(), Some(&pop), None, cwd)?;
        let xi = pop.x_space().parse(&args.data.xi)?;
        let pop_sel = match &args.data.omega {
            Some(o) => CellSelector::long(xi, pop.w_space().parse(o)?),
            None => CellSelector::at(xi),
        };
        result["bias_gap"] = serde_json::to_value(bias_gap(&pop, &pop_model, &pop_sel)?)?;
    }
    Ok((result, draws_series(&mi)))
}
