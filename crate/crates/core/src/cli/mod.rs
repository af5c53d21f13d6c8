//! Command-line front end: `simulate`, `continuation`, `lincheck`, `oracle-compare`.
//!
//! Exit codes: `0` success (converged / checks pass), `3` time budget hit or a check failed,
//! `2` invalid input, `1` internal error.

mod config;
mod output;

pub use config::{ContinuationSection, FlowSection, Format, InitSpec, OutputSection, ProblemSection, RunConfig};
pub use output::{diagnostics_header, diagnostics_row, gnuplot_script, num};

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::RsfError;
use crate::flow::{Criticality, Flow, StopReason};
use crate::lincheck::{self, SweepSpec};
use crate::netstate::{build_initial_state, Mode, NetworkState};
use crate::oracle;
use crate::penalty::run_continuation;
use crate::vecops::dist;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rsf", version, about = "Riemannian spline flows: simulate, continue in σ, check the linear theory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Also write a gnuplot script referencing the CSV outputs.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one gradient flow to convergence or the time budget.
    Simulate(ConfigArg),
    /// Run the penalty continuation σ → 0.
    Continuation(ConfigArg),
    /// Assemble boundary operators and sweep the complementary-condition determinants.
    Lincheck(LincheckArgs),
    /// Run to convergence and compare with the Euclidean spline.
    OracleCompare(ConfigArg),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct LincheckArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    /// Orders swept (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4, 5])]
    pub ks: Vec<usize>,
    /// Samples of θ on [−π/2, π/2]; 10^{±3} are always added.
    #[arg(long, default_value_t = 32)]
    pub theta_samples: usize,
    /// Optional run config: its fitting-mode initial state gets an order-zero compatibility report.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Internal(String),
    Incomplete(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(s) | CliError::Internal(s) | CliError::Incomplete(s) => f.write_str(s),
        }
    }
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Internal(_) => EXIT_INTERNAL,
            CliError::Incomplete(_) => EXIT_INCOMPLETE,
        }
    }
}

impl From<RsfError> for CliError {
    fn from(e: RsfError) -> Self {
        use RsfError::*;
        let s = e.to_string();
        match e {
            StabilityBlowup { .. } | SingularSystem(_) | RetractionFailure(_) => CliError::Internal(s),
            NonconvergentStage { .. } => CliError::Incomplete(s),
            _ => CliError::Invalid(s),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

struct Ctx {
    quiet: bool,
    plot: bool,
    out: Option<PathBuf>,
}

impl Ctx {
    fn say(&self, s: &str) {
        if !self.quiet {
            println!("{s}");
        }
    }

    fn dir(&self, cfg: Option<&RunConfig>) -> Result<PathBuf, CliError> {
        let d = match (&self.out, cfg) {
            (Some(d), _) => d.clone(),
            (None, Some(c)) => PathBuf::from(&c.output.dir),
            (None, None) => PathBuf::from("out"),
        };
        std::fs::create_dir_all(&d).map_err(|e| io_err(&d, e))?;
        Ok(d)
    }
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let s = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(RunConfig::from_json(&s)?)
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    let ctx = Ctx { quiet: cli.quiet, plot: cli.plot, out: cli.out };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, &a.config),
        Command::Continuation(a) => continuation(&ctx, &a.config),
        Command::Lincheck(a) => lincheck_cmd(&ctx, &a),
        Command::OracleCompare(a) => oracle_compare(&ctx, &a.config),
    }
}

#[derive(Serialize)]
struct Summary {
    command: &'static str,
    manifold: String,
    mode: Mode,
    stop_reason: StopReason,
    steps: usize,
    t_final: f64,
    dt: f64,
    #[serde(rename = "E_initial")]
    e_initial: f64,
    #[serde(rename = "E_final")]
    e_final: f64,
    /// `max ‖𝓛(γ_l)‖` and `max ‖D_x∂_xχ_l‖` of the final state.
    criticality: Criticality,
    final_z1: f64,
    final_balancing_residual: f64,
    final_max_junction_jump: Vec<f64>,
    final_constraint_violation: f64,
}

fn exit_for(stop: StopReason) -> i32 {
    match stop {
        StopReason::Converged => EXIT_OK,
        StopReason::TimeBudget => EXIT_INCOMPLETE,
    }
}

fn simulate(ctx: &Ctx, path: &Path) -> Result<i32, CliError> {
    let cfg = load(path)?;
    let problem = cfg.problem()?;
    let fc = cfg.flow_config(&problem)?;
    let init = build_initial_state(&problem, fc.mode, fc.n, &cfg.init_strategy()?)?;
    let flow = Flow::new(&problem, &fc)?;
    let dir = ctx.dir(Some(&cfg))?;
    let dim = problem.dim();
    let mut traj = NetworkState::csv_header(dim);
    let mut diag = diagnostics_header(fc.k);
    let out = flow.run_observed(&init, |s, r| {
        s.csv_rows(&mut traj);
        diag.push_str(&diagnostics_row(r));
    })?;
    let last = out.records.last().expect("first record always present");
    let summary = Summary {
        command: "simulate",
        manifold: problem.manifold.name(),
        mode: fc.mode,
        stop_reason: out.stop,
        steps: out.steps,
        t_final: out.state.t,
        dt: flow.dt(),
        e_initial: out.initial_energy,
        e_final: last.energy.total,
        criticality: flow.criticality(&out.state)?,
        final_z1: last.z1,
        final_balancing_residual: last.balancing_residual,
        final_max_junction_jump: last.max_junction_jump.clone(),
        final_constraint_violation: last.constraint_violation,
    };
    if cfg.wants(Format::Csv) {
        write_file(&dir.join("trajectory.csv"), &traj)?;
        write_file(&dir.join("diagnostics.csv"), &diag)?;
    }
    if cfg.wants(Format::Json) {
        write_file(&dir.join("summary.json"), &to_json(&summary))?;
        write_file(&dir.join("final_state.json"), &(out.state.to_json() + "\n"))?;
    }
    if ctx.plot {
        write_file(&dir.join("plot.gp"), &gnuplot_script(dim))?;
    }
    ctx.say(&format!(
        "{:?} after {} steps (t = {}), E_final = {:.6e}, max |L| = {:.3e}",
        out.stop, out.steps, out.state.t, summary.e_final, summary.criticality.euler_lagrange
    ));
    Ok(exit_for(out.stop))
}

fn continuation(ctx: &Ctx, path: &Path) -> Result<i32, CliError> {
    let cfg = load(path)?;
    let problem = cfg.problem()?;
    let mut fc = cfg.flow_config(&problem)?;
    // the continuation always runs the fitting flow
    fc.mode = Mode::Fitting;
    let plan = cfg.plan(&fc)?;
    let init = build_initial_state(&problem, Mode::Fitting, fc.n, &cfg.init_strategy()?)?;
    let report = run_continuation(&problem, &init, &fc, &plan)?;
    let dir = ctx.dir(Some(&cfg))?;
    if cfg.wants(Format::Json) {
        write_file(&dir.join("continuation.json"), &(report.to_json() + "\n"))?;
    }
    if let Some(limit) = report.limit() {
        if cfg.wants(Format::Csv) {
            let mut traj = NetworkState::csv_header(problem.dim());
            limit.csv_rows(&mut traj);
            write_file(&dir.join("limit.csv"), &traj)?;
        }
        if cfg.wants(Format::Json) {
            write_file(&dir.join("final_state.json"), &(limit.to_json() + "\n"))?;
        }
    }
    for s in &report.stages {
        ctx.say(&format!(
            "σ = {:<10} {:?} steps {:>6}  interp {:.3e}  |χ−p| {:.3e} ≤ {:.3e}: {}",
            s.sigma, s.stop_reason, s.steps, s.interp_error, s.max_chi_deviation, s.penalty_bound, s.penalty_bound_ok
        ));
    }
    ctx.say(&format!("Cauchy (decreasing for j ≥ 1): {}", report.cauchy_decreasing));
    Ok(if report.nonconvergent_stages.is_empty() { EXIT_OK } else { EXIT_INCOMPLETE })
}

fn lincheck_cmd(ctx: &Ctx, a: &LincheckArgs) -> Result<i32, CliError> {
    let spec = SweepSpec { ks: a.ks.clone(), theta_samples: a.theta_samples };
    if spec.ks.iter().any(|&k| k < 2) {
        return Err(CliError::Invalid("swept orders must satisfy k ≥ 2".into()));
    }
    let mut report = lincheck::linear_theory_report(a.k, a.n, a.q, &spec)?;
    let cfg = match &a.config {
        Some(p) => Some(load(p)?),
        None => None,
    };
    if let Some(cfg) = &cfg {
        let problem = cfg.problem()?;
        let fc = cfg.flow_config(&problem)?;
        let init = build_initial_state(&problem, Mode::Fitting, fc.n, &cfg.init_strategy()?)?;
        report.compatibility = Some(lincheck::compatibility_order_zero(&problem, &init));
    }
    let dir = ctx.dir(cfg.as_ref())?;
    write_file(&dir.join("lincheck.json"), &(report.to_json() + "\n"))?;
    for s in &report.shapes {
        ctx.say(&format!(
            "{:<8} {} × {} (expected {} × {}; stated {} = {} × {})",
            s.name, s.rows, s.cols, s.expected_rows, s.expected_cols, s.stated, s.stated_rows, s.stated_cols
        ));
    }
    let sm = &report.summary;
    ctx.say(&format!(
        "{} samples: min |det| = {:.3e}, max identity error = {:.3e}, Re-split failures = {}",
        sm.samples, sm.min_abs_det, sm.max_identity_error, sm.partition_failures
    ));
    if let Some(c) = &report.compatibility {
        ctx.say(&format!("order-zero compatibility: {} ({} lines failing)", c.all_pass, c.failures().len()));
    }
    Ok(if report.passes() { EXIT_OK } else { EXIT_INCOMPLETE })
}

#[derive(Serialize)]
struct OracleComparison {
    stop_reason: StopReason,
    steps: usize,
    n: usize,
    max_error: f64,
    l2_error: f64,
}

fn oracle_compare(ctx: &Ctx, path: &Path) -> Result<i32, CliError> {
    let cfg = load(path)?;
    let problem = cfg.problem()?;
    if !problem.manifold.is_euclidean() {
        return Err(CliError::Invalid(format!(
            "oracle-compare needs a Euclidean manifold, got {}",
            problem.manifold.name()
        )));
    }
    let fc = cfg.flow_config(&problem)?;
    let init = build_initial_state(&problem, fc.mode, fc.n, &cfg.init_strategy()?)?;
    let out = Flow::new(&problem, &fc)?.run(&init)?;
    let pp = if problem.lambda > 0.0 { oracle::lambda_spline_ode(&problem)? } else { oracle::euclidean_spline(&problem)? };
    let reference = pp.sample(fc.n);
    let mut max_error: f64 = 0.0;
    let mut l2 = 0.0;
    for (a, b) in out.state.gamma_arcs.iter().zip(&reference) {
        let e: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| dist(x, y)).collect();
        max_error = e.iter().cloned().fold(max_error, f64::max);
        l2 += crate::calculus::quadrature(&e.iter().map(|v| v * v).collect::<Vec<_>>());
    }
    let cmp = OracleComparison { stop_reason: out.stop, steps: out.steps, n: fc.n, max_error, l2_error: l2.sqrt() };
    let dir = ctx.dir(Some(&cfg))?;
    write_file(&dir.join("oracle_compare.json"), &to_json(&cmp))?;
    ctx.say(&format!("{:?} after {} steps: max error {:.3e}, L2 error {:.3e}", out.stop, out.steps, max_error, cmp.l2_error));
    Ok(exit_for(out.stop))
}
