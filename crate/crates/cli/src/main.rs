//! `l1sphere` command-line front end.
//!
//! Exit codes: 0 success, 1 computational failure (or a failed verification),
//! 2 usage error.

mod config;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use l1sphere::analysis::{logspace, ScanConfig, Source};
use l1sphere::closed_form::{closed_form_report, DEFAULT_BOX_FACTOR};
use l1sphere::direct::{minimize, SolverOptions};
use l1sphere::{sample, scaling_scan, solve_parameters, EnergyBreakdown, Error, RadialGrid};

#[derive(Parser, Debug)]
#[command(
    name = "l1sphere",
    version,
    about = "Constrained L1-regularized Dirichlet energy minimizers on R^3"
)]
struct Cli {
    /// JSON object of defaults for the subcommand's flags, keyed by flag name
    /// with underscores (`r_max`, `energy_tol`, ...). Flags given on the
    /// command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form minimizer: parameter report and sampled profile.
    Solve(SolveArgs),
    /// Direct method: projected proximal gradient flow with rearrangement.
    Minimize(MinimizeArgs),
    /// Run every identity check and exit 1 if any fails.
    Verify(verify::VerifyArgs),
    /// Log-log scaling fits over a range of betas.
    Scan(ScanArgs),
}

#[derive(Args, Debug, Serialize, Deserialize)]
struct SolveArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Grid nodes [default: 4096]
    #[arg(long)]
    n: Option<usize>,
    /// Grid radius [default: 1.5 R]
    #[arg(long)]
    r_max: Option<f64>,
    /// Root tolerance for mu [default: 1e-13]
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Deserialize)]
struct MinimizeArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Grid nodes [default: 2048]
    #[arg(long)]
    n: Option<usize>,
    /// Grid radius [default: 2 R]
    #[arg(long)]
    r_max: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct SolverArgs {
    /// Gradient step [default: 0.25 h^2]
    #[arg(long)]
    step: Option<f64>,
    /// [default: 5000000]
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative energy decrease per unit flow time that stops the run [default: 1e-4]
    #[arg(long)]
    energy_tol: Option<f64>,
    /// Iterations between rearrangements, 0 disables [default: 1000]
    #[arg(long)]
    rearrange_every: Option<usize>,
    /// Iterations between energy checkpoints [default: 1000]
    #[arg(long)]
    check_every: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Relative noise amplitude on the initial Gaussian [default: 0]
    #[arg(long)]
    perturbation: Option<f64>,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            step: self.step,
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            energy_tol: self.energy_tol.unwrap_or(d.energy_tol),
            rearrange_every: self.rearrange_every.unwrap_or(d.rearrange_every),
            seed: self.seed.unwrap_or(d.seed),
            perturbation: self.perturbation.unwrap_or(d.perturbation),
            check_every: self.check_every.unwrap_or(d.check_every),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SourceArg {
    #[value(name = "closed_form", alias = "closed-form")]
    ClosedForm,
    Direct,
}

#[derive(Args, Debug, Serialize, Deserialize)]
struct ScanArgs {
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    /// Number of log-spaced betas [default: 15]
    #[arg(long)]
    num: Option<usize>,
    /// [default: closed_form]
    #[arg(long, value_enum)]
    source: Option<SourceArg>,
    /// Grid nodes per beta [default: 4096 closed form, 1024 direct]
    #[arg(long)]
    n: Option<usize>,
    /// Grid radius in units of R_beta [default: 1.5]
    #[arg(long)]
    box_factor: Option<f64>,
    /// Root tolerance for mu [default: 1e-13]
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub(crate) enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidProfile(_)
            | Error::InsufficientData(_) => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

pub(crate) type CmdResult = Result<(), Failure>;

pub(crate) fn required<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing required --{flag}")))
}

pub(crate) fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::Compute(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Compute(e.to_string()))?;
    fs::write(path, text + "\n")
        .map_err(|e| Failure::Compute(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_solve(args: SolveArgs) -> CmdResult {
    let beta = required(args.beta, "beta")?;
    let params = solve_parameters(beta, args.tol.unwrap_or(1e-13))?;
    let n = args.n.unwrap_or(4096);
    let grid = match args.r_max {
        Some(r) => RadialGrid::new(n, r)?,
        None => params.default_grid(n)?,
    };
    let report = closed_form_report(&params, &grid)?;
    let dir = out_dir(&args.out)?;
    write_json(&dir.join("solve.json"), &report)?;
    let csv = dir.join("profile.csv");
    sample(&params, &grid).save_csv(&csv)?;
    println!("wrote {}", csv.display());
    Ok(())
}

#[derive(Serialize)]
struct MinimizeReport {
    beta: f64,
    n: usize,
    r_max: f64,
    options: SolverOptions,
    step: f64,
    iterations: usize,
    converged: bool,
    violations: usize,
    energy: EnergyBreakdown,
}

fn run_minimize(args: MinimizeArgs) -> CmdResult {
    let beta = required(args.beta, "beta")?;
    let opts = args.solver.options();
    opts.validate()?;
    let r_max = match args.r_max {
        Some(r) => r,
        None => 2.0 * solve_parameters(beta, 1e-13)?.radius,
    };
    let grid = RadialGrid::new(args.n.unwrap_or(2048), r_max)?;
    let out = minimize(beta, &grid, &opts)?;
    let dir = out_dir(&args.out)?;
    let report = MinimizeReport {
        beta,
        n: grid.n(),
        r_max,
        step: opts.step_for(&grid),
        options: opts,
        iterations: out.trace.iterations,
        converged: out.trace.converged,
        violations: out.trace.violations,
        energy: out.energy,
    };
    write_json(&dir.join("energy.json"), &report)?;
    for (name, result) in [
        ("profile.csv", out.profile.save_csv(dir.join("profile.csv"))),
        ("trace.csv", out.trace.save_csv(dir.join("trace.csv"))),
    ] {
        result?;
        println!("wrote {}", dir.join(name).display());
    }
    if !out.trace.converged {
        eprintln!(
            "warning: stopping tolerance not reached in {} iterations",
            out.trace.iterations
        );
    }
    Ok(())
}

fn run_scan(args: ScanArgs) -> CmdResult {
    let lo = required(args.beta_min, "beta-min")?;
    let hi = required(args.beta_max, "beta-max")?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Failure::Usage(format!(
            "need 0 < beta-min < beta-max, got {lo} and {hi}"
        )));
    }
    let source = match args.source.unwrap_or(SourceArg::ClosedForm) {
        SourceArg::ClosedForm => Source::ClosedForm,
        SourceArg::Direct => Source::Direct,
    };
    let cfg = ScanConfig {
        n: args.n.unwrap_or(match source {
            Source::ClosedForm => 4096,
            Source::Direct => 1024,
        }),
        box_factor: args.box_factor.unwrap_or(match source {
            Source::ClosedForm => DEFAULT_BOX_FACTOR,
            Source::Direct => 2.0,
        }),
        tol: args.tol.unwrap_or(1e-13),
        solver: args.solver.options(),
    };
    cfg.solver.validate()?;
    let report = scaling_scan(&logspace(lo, hi, args.num.unwrap_or(15)), source, &cfg)?;
    let dir = out_dir(&args.out)?;
    write_json(&dir.join("scan.json"), &report)?;
    let csv = dir.join("scan.csv");
    report.save_records_csv(&csv)?;
    println!("wrote {}", csv.display());
    let e = report.exponents;
    println!(
        "exponents a {:.10} mu {:.10} R {:.10} F {:.10}",
        e.a, e.mu, e.r, e.f
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(path) => Some(config::load(path)?),
        None => None,
    };
    match cli.command {
        Command::Solve(a) => run_solve(config::merge(a, cfg)?),
        Command::Minimize(a) => run_minimize(config::merge(a, cfg)?),
        Command::Verify(a) => verify::run(config::merge(a, cfg)?),
        Command::Scan(a) => run_scan(config::merge(a, cfg)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
