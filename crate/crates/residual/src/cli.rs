//! Command-line front end.
//!
//! ```text
//! residual solve <config> [--out report.json] [--radius-is-squared]
//! residual rates --p 1 [--sparsity 5] [--m 64] [--n 128] ... --out rates.csv
//! residual stability data|operator|value|counterexample [flags] --out table.csv
//! residual density --samples xs.csv [--beta auto|<value>] [--cells 100] --out u.csv
//! ```
//!
//! CSV goes to `--out` (stdout if omitted); the JSON summary goes to
//! `--summary`, or to stdout when `--out` names a file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use residual_core::rates::{
    build_rate_instance, expected_rate, fit_loglog_slope, geometric_grid, run_rate_experiment, RateColumn,
    RateInstanceSpec, RateNorm,
};
use residual_core::stability::{
    check_value_right_continuity, data_schedule, geometric_schedule, instability_demo, operator_schedule,
    run_data_stability, run_operator_stability, StabilityReport,
};
use residual_core::transport::{binned_masses, density_estimate, grid_w1, DensityOptions, GridShape};
use residual_core::{residual_method_solve, Problem, SolveReport, SolverOptions};

use crate::config::Config;
use crate::error::{CliError, ExitCode, Result};
use crate::format::{number, optional, to_json};
use crate::io::{read_matrix, read_samples, read_vector, write_csv, write_text};

/// Slope band used for the pass/fail verdict of `rates`.
pub const RATE_SLOPE_TOLERANCE: f64 = 0.15;

const PROBLEM_KEYS: [&str; 4] = ["operator", "data", "beta", "p"];
const SOLVER_KEYS: [&str; 6] = [
    "max_outer_bisections",
    "max_inner_iterations",
    "inner_tolerance",
    "discrepancy_match_tolerance",
    "restarts",
    "rng_seed",
];

#[derive(Debug, Parser)]
#[command(name = "residual", version, about = "Constrained lp regularization: solver and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem described by a `key = value` config.
    Solve(SolveArgs),
    /// Convergence-rate sweep over a geometric grid of radii.
    Rates(RatesArgs),
    /// Stability experiments.
    #[command(subcommand)]
    Stability(StabilityCommand),
    /// Minimum-entropy density estimate under a Wasserstein-1 constraint.
    Density(DensityArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Config with keys operator, data, beta, p and optional solver settings.
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Interpret `beta` as a bound on the squared residual norm.
    #[arg(long)]
    pub radius_is_squared: bool,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long)]
    pub p: f64,
    /// Nonzeros of the ground truth; 0 for dense.
    #[arg(long, default_value_t = 5)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 9)]
    pub num_beta: usize,
    /// Noise draws per radius.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Seed of the instance (operator and ground truth).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct Output {
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary destination.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum StabilityCommand {
    /// Perturb the data: y_k = y + (scale/k)·d.
    Data(PerturbArgs),
    /// Perturb the operator: F_k = F + (scale/k)·E with ‖E‖ = 1.
    Operator(PerturbArgs),
    /// Right-continuity of the value function in the radius.
    Value(ValueArgs),
    /// min x² subject to |x³ − x² − (y + δ)| ≤ y: a solution map that jumps at δ = 0.
    Counterexample(CounterexampleArgs),
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Problem config (same keys as `solve`); p must exceed 1.
    pub config: PathBuf,
    /// Largest k of the schedule 1, 2, 4, …
    #[arg(long, default_value_t = 64)]
    pub max_k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Seed of the perturbation direction.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub radius_is_squared: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 1e-1)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 6)]
    pub eps_count: usize,
    #[arg(long)]
    pub radius_is_squared: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = residual_core::stability::INSTABILITY_GRID)]
    pub resolution: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Samples, one per line or comma-separated.
    #[arg(long)]
    pub samples: PathBuf,
    /// Wasserstein-1 radius, or `auto` for 2·W₁(histogram, uniform)/√k.
    #[arg(long, default_value = "auto")]
    pub beta: String,
    #[arg(long, default_value_t = 100)]
    pub cells: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0)]
    pub upper: f64,
    /// Mirror-descent iterations per penalty weight.
    #[arg(long, default_value_t = DensityOptions::default().iterations)]
    pub iterations: usize,
    #[command(flatten)]
    pub output: Output,
}

/// Parses `args` (including the program name) and runs the command,
/// reporting errors on stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Input } else { ExitCode::Success };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::Success,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::Rates(a) => cmd_rates(a),
        Command::Stability(StabilityCommand::Data(a)) => cmd_stability_perturb(a, false),
        Command::Stability(StabilityCommand::Operator(a)) => cmd_stability_perturb(a, true),
        Command::Stability(StabilityCommand::Value(a)) => cmd_stability_value(a),
        Command::Stability(StabilityCommand::Counterexample(a)) => cmd_counterexample(a),
        Command::Density(a) => cmd_density(a),
    }
}

/// Problem and solver settings read from a config file.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub options: SolverOptions,
}

/// Reads a problem config; `beta` is replaced by its square root when
/// `radius_is_squared` is set.
pub fn load_problem(path: &Path, radius_is_squared: bool) -> Result<LoadedProblem> {
    let config = Config::load(path)?;
    let allowed: Vec<&str> = PROBLEM_KEYS.iter().chain(SOLVER_KEYS.iter()).copied().collect();
    config.restrict(&allowed)?;
    let operator = read_matrix(Path::new(config.raw("operator").ok_or_else(|| missing("operator"))?))?;
    let data = read_vector(Path::new(config.raw("data").ok_or_else(|| missing("data"))?))?;
    let mut beta: f64 = config.require("beta")?;
    let p: f64 = config.require("p")?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(CliError::input(format!("beta must be finite and nonnegative, got {beta}")));
    }
    if radius_is_squared {
        beta = beta.sqrt();
    }
    if operator.nrows() != data.len() {
        return Err(CliError::input(format!(
            "operator has {} rows but data has {} entries",
            operator.nrows(),
            data.len()
        )));
    }
    let problem = Problem::new(operator, data, beta, p)?;
    let d = SolverOptions::default();
    let options = SolverOptions {
        max_outer_bisections: config.get("max_outer_bisections")?.unwrap_or(d.max_outer_bisections),
        max_inner_iterations: config.get("max_inner_iterations")?.unwrap_or(d.max_inner_iterations),
        inner_tolerance: config.get("inner_tolerance")?.unwrap_or(d.inner_tolerance),
        discrepancy_match_tolerance: config
            .get("discrepancy_match_tolerance")?
            .unwrap_or(d.discrepancy_match_tolerance),
        restarts: config.get("restarts")?.unwrap_or(d.restarts),
        rng_seed: config.get("rng_seed")?.unwrap_or(d.rng_seed),
    };
    options.validate()?;
    Ok(LoadedProblem { problem, options })
}

fn missing(key: &str) -> CliError {
    CliError::input(format!("missing required key `{key}`"))
}

/// JSON form of a [`SolveReport`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveJson {
    pub x: Vec<f64>,
    pub objective: f64,
    pub discrepancy: f64,
    pub alpha: Option<f64>,
    pub status: &'static str,
    pub iterations: usize,
    pub restarts_used: usize,
}

impl From<&SolveReport> for SolveJson {
    fn from(r: &SolveReport) -> Self {
        Self {
            x: r.x.iter().copied().collect(),
            objective: r.objective,
            discrepancy: r.discrepancy,
            alpha: r.alpha,
            status: r.status.as_str(),
            iterations: r.iterations,
            restarts_used: r.restarts_used,
        }
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let loaded = load_problem(&a.config, a.radius_is_squared)?;
    let report = residual_method_solve(&loaded.problem, &loaded.options)?;
    write_text(a.out.as_deref(), &to_json(&SolveJson::from(&report)))
}

fn emit(output: &Output, header: &[&str], rows: &[Vec<String>], summary: &impl Serialize) -> Result<()> {
    write_csv(output.out.as_deref(), Some(header), rows)?;
    match (&output.summary, &output.out) {
        (Some(path), _) => write_text(Some(path), &to_json(summary)),
        (None, Some(_)) => write_text(None, &to_json(summary)),
        (None, None) => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct RatesSummary {
    p: f64,
    sparsity: usize,
    m: usize,
    n: usize,
    instance_seed: u64,
    column: &'static str,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    expected: Option<f64>,
    tolerance: f64,
    pass: Option<bool>,
    slope_lp: Option<f64>,
    rows: usize,
    skipped_cells: Vec<String>,
}

fn cmd_rates(a: &RatesArgs) -> Result<()> {
    if a.num_beta < 3 {
        return Err(CliError::input("num-beta must be at least 3 to fit a slope"));
    }
    if a.seeds == 0 {
        return Err(CliError::input("seeds must be at least 1"));
    }
    if !(a.beta_min > 0.0 && a.beta_max > a.beta_min && a.beta_max.is_finite()) {
        return Err(CliError::input("need 0 < beta-min < beta-max"));
    }
    let spec = RateInstanceSpec::new(a.m, a.n, a.p, a.sparsity, a.seed);
    spec.validate()?;
    let instance = build_rate_instance(&spec)?;
    let grid = geometric_grid(a.beta_min, a.beta_max, a.num_beta);
    let opts = SolverOptions { rng_seed: a.seed, ..SolverOptions::default() };
    let table = run_rate_experiment(&instance, &grid, a.seeds, &opts)?;
    let fit = fit_loglog_slope(&table, RateColumn::ErrL2)
        .map_err(|e| CliError::Failure(format!("slope fit failed: {e}")))?;
    let slope_lp = fit_loglog_slope(&table, RateColumn::ErrLp).ok().map(|f| f.slope);
    let expected = expected_rate(a.p, a.sparsity > 0, RateNorm::L2).ok();
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                number(r.beta),
                r.seed.to_string(),
                number(r.err_l2),
                number(r.err_lp),
                optional(r.bregman),
                number(r.discrepancy),
                number(r.objective_gap),
            ]
        })
        .collect();
    let summary = RatesSummary {
        p: a.p,
        sparsity: a.sparsity,
        m: a.m,
        n: a.n,
        instance_seed: instance.seed_used,
        column: "err_l2",
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        expected,
        tolerance: RATE_SLOPE_TOLERANCE,
        pass: expected.map(|e| (fit.slope - e).abs() <= RATE_SLOPE_TOLERANCE),
        slope_lp,
        rows: table.rows.len(),
        skipped_cells: table.diagnostics.clone(),
    };
    emit(
        &a.output,
        &["beta", "seed", "err_l2", "err_lp", "bregman", "discrepancy", "objective_gap"],
        &rows,
        &summary,
    )
}

#[derive(Debug, Serialize)]
struct StabilitySummary {
    kind: &'static str,
    reference: SolveJson,
    finest_k: Option<usize>,
    finest_norm_gap: Option<f64>,
    finest_r_gap: Option<f64>,
    infeasible_rows: usize,
}

fn stability_rows(report: &StabilityReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                number(r.perturbation_size),
                number(r.norm_gap),
                number(r.r_gap),
                number(r.value_gap),
            ]
        })
        .collect()
}

fn cmd_stability_perturb(a: &PerturbArgs, operator: bool) -> Result<()> {
    let loaded = load_problem(&a.config, a.radius_is_squared)?;
    if a.max_k == 0 {
        return Err(CliError::input("max-k must be at least 1"));
    }
    let schedule = geometric_schedule(a.max_k);
    let problem = &loaded.problem;
    let report = if operator {
        let cells = operator_schedule(problem.operator(), &schedule, a.scale, a.seed)?;
        run_operator_stability(problem, &cells, &loaded.options)?
    } else {
        let cells = data_schedule(problem, &schedule, a.scale, a.seed)?;
        run_data_stability(problem, &cells, &loaded.options)?
    };
    let finest = report.finest();
    let summary = StabilitySummary {
        kind: if operator { "operator" } else { "data" },
        reference: SolveJson::from(&report.reference),
        finest_k: finest.map(|r| r.k),
        finest_norm_gap: finest.map(|r| r.norm_gap),
        finest_r_gap: finest.map(|r| r.r_gap),
        infeasible_rows: report.rows.iter().filter(|r| r.norm_gap.is_infinite()).count(),
    };
    emit(
        &a.output,
        &["k", "perturbation_size", "norm_gap", "r_gap", "value_gap"],
        &stability_rows(&report),
        &summary,
    )
}

#[derive(Debug, Serialize)]
struct ValueSummary {
    beta: f64,
    value: f64,
    sup_gap: f64,
    max_increase: f64,
}

fn cmd_stability_value(a: &ValueArgs) -> Result<()> {
    let loaded = load_problem(&a.config, a.radius_is_squared)?;
    if a.eps_count == 0 || !(a.eps_min > 0.0 && a.eps_max >= a.eps_min) {
        return Err(CliError::input("need eps-count ≥ 1 and 0 < eps-min ≤ eps-max"));
    }
    if a.eps_count > 1 && a.eps_max == a.eps_min {
        return Err(CliError::input("eps-max must exceed eps-min when eps-count > 1"));
    }
    let mut eps = geometric_grid(a.eps_min, a.eps_max, a.eps_count);
    eps.reverse();
    let p = &loaded.problem;
    let report = check_value_right_continuity(p.operator(), p.data(), p.p(), p.beta(), &eps, &loaded.options)?;
    let rows: Vec<Vec<String>> = report
        .shifted
        .iter()
        .map(|(e, v)| vec![number(*e), number(*v), number(report.value - v)])
        .collect();
    let summary = ValueSummary {
        beta: report.beta,
        value: report.value,
        sup_gap: report.sup_gap,
        max_increase: report.max_increase,
    };
    emit(&a.output, &["epsilon", "value", "gap"], &rows, &summary)
}

#[derive(Debug, Serialize)]
struct CounterexampleSummary {
    y: f64,
    beta: f64,
    unperturbed: Option<f64>,
    jump: f64,
}

fn cmd_counterexample(a: &CounterexampleArgs) -> Result<()> {
    let report = instability_demo(a.y, &a.deltas, a.resolution)?;
    let mut rows = vec![vec![number(0.0), optional(report.unperturbed), String::new()]];
    rows.extend(
        report.rows.iter().map(|r| vec![number(r.delta), optional(r.x), number(r.local_variation)]),
    );
    let summary = CounterexampleSummary {
        y: report.y,
        beta: report.beta,
        unperturbed: report.unperturbed,
        jump: report.jump,
    };
    emit(&a.output, &["delta", "x", "local_variation"], &rows, &summary)
}

#[derive(Debug, Serialize)]
struct DensitySummary {
    samples: usize,
    cells: usize,
    lower: f64,
    upper: f64,
    beta: f64,
    beta_rule: &'static str,
    status: &'static str,
    theta: Option<f64>,
    w1: f64,
    entropy: f64,
    bisections: usize,
    iterations: usize,
}

/// `2·W₁(ŷ, uniform)/√k` for the histogram `ŷ` of `k` samples.
pub fn auto_beta(samples: &[f64], shape: &GridShape) -> Result<f64> {
    let q = binned_masses(samples, shape)?;
    let uniform = vec![1.0 / shape.cells as f64; shape.cells];
    Ok(2.0 * grid_w1(&q, &uniform, shape.cell_width()) / (samples.len() as f64).sqrt())
}

fn cmd_density(a: &DensityArgs) -> Result<()> {
    let samples = read_samples(&a.samples)?;
    if samples.is_empty() {
        return Err(CliError::input(format!("{}: no samples", a.samples.display())));
    }
    let shape = GridShape::new(a.lower, a.upper, a.cells)?;
    let (beta, beta_rule) = if a.beta.trim().eq_ignore_ascii_case("auto") {
        (auto_beta(&samples, &shape)?, "auto")
    } else {
        let b: f64 = a
            .beta
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("beta must be a number or `auto`, got `{}`", a.beta)))?;
        (b, "given")
    };
    let opts = DensityOptions { iterations: a.iterations, ..DensityOptions::default() };
    let (u, report) = density_estimate(&samples, beta, &shape, &opts)?;
    let rows: Vec<Vec<String>> =
        (0..u.cells()).map(|i| vec![number(u.cell_left(i)), number(u.values()[i])]).collect();
    let summary = DensitySummary {
        samples: samples.len(),
        cells: a.cells,
        lower: a.lower,
        upper: a.upper,
        beta,
        beta_rule,
        status: report.status.as_str(),
        theta: report.theta,
        w1: report.w1,
        entropy: report.entropy,
        bisections: report.bisections,
        iterations: report.iterations,
    };
    emit(&a.output, &["cell_left", "value"], &rows, &summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
